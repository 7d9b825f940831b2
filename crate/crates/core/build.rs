fn main() {
    // LAPACK/BLAS provider: the system OpenBLAS ships LAPACK, CBLAS and BLAS
    // symbols in one shared object, so no *-src build is needed.
    println!("cargo:rustc-link-lib=dylib=openblas");
}
