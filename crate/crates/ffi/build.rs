//! Generates `include/jetgeo.h` from the exported C ABI on every build.

use std::env;
use std::path::PathBuf;

fn main() {
    let crate_dir = PathBuf::from(env::var("CARGO_MANIFEST_DIR").unwrap());
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");

    let bindings = cbindgen::generate(&crate_dir).expect("C header generation failed");
    bindings.write_to_file(crate_dir.join("include").join("jetgeo.h"));
}
