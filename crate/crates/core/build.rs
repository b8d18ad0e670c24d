fn main() {
    // Dense symmetric eigensolves and matrix products go through the system
    // BLAS/LAPACK rather than a pure-Rust fallback; OpenBLAS provides both.
    println!("cargo:rustc-link-search=native=/usr/lib/x86_64-linux-gnu");
    println!("cargo:rustc-link-lib=dylib=openblas");
}
