//! Compiles every Rust snippet in the guide under `book/` as a doc-test,
//! so the book cannot drift from the crate it documents.

macro_rules! chapter {
    ($name:ident, $path:literal) => {
        #[doc = include_str!($path)]
        mod $name {}
    };
}

chapter!(readme, "../../../README.md");
chapter!(index, "../../../book/src/index.md");
chapter!(quickstart, "../../../book/src/quickstart.md");
chapter!(signs, "../../../book/src/signs.md");
chapter!(statistics, "../../../book/src/statistics.md");
chapter!(regimes, "../../../book/src/regimes.md");
chapter!(sampling, "../../../book/src/sampling.md");
chapter!(streams, "../../../book/src/streams.md");
chapter!(harness, "../../../book/src/harness.md");
chapter!(reports, "../../../book/src/reports.md");
chapter!(moments, "../../../book/src/moments.md");
chapter!(cli, "../../../book/src/cli.md");
