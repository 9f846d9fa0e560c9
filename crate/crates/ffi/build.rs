fn main() {
    let dir = std::env::var("CARGO_MANIFEST_DIR").unwrap();
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
    cbindgen::Builder::new()
        .with_crate(&dir)
        .with_config(cbindgen::Config::from_file(format!("{dir}/cbindgen.toml")).expect("cbindgen.toml"))
        .generate()
        .expect("unable to generate C bindings")
        .write_to_file(format!("{dir}/include/galbrun.h"));
}
