//! Compiles and runs a small C program against the generated header and the
//! static library, exercising the ABI the way a foreign binding would.

use std::path::PathBuf;
use std::process::Command;

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include <math.h>
#include "lppl.h"

int main(void) {
    LpplCurveParams params = {300.0, 0.7, 10.0, 1.0, 10.0, -0.1, 0.02};

    double value = 0.0;
    if (lppl_log_price(&params, 240.0, &value) != LPPL_STATUS_OK) return 1;
    if (fabs(value - 8.02411233553149827) > 1e-10) return 2;
    if (lppl_log_price(&params, 301.0, &value) != LPPL_STATUS_DOMAIN) return 3;

    double margin = lppl_hazard_margin(&params);
    if (fabs(margin + 0.130489401216124179) > 1e-12) return 4;

    LpplSeries *series = NULL;
    if (lppl_series_reference(&params, 240, 1.0, &series) != LPPL_STATUS_OK) return 5;
    if (lppl_series_len(series) != 240) return 6;

    LpplFitOptions options = lppl_fit_options_default();
    options.seed = 5;
    options.top_k = 3;
    options.taboo_iterations = 80;
    options.taboo_pool = 6;

    LpplEnsemble *ensemble = NULL;
    if (lppl_fit(series, &options, &ensemble) != LPPL_STATUS_OK) {
        fprintf(stderr, "fit: %s\n", lppl_last_error_message());
        return 7;
    }
    LpplCurveParams best;
    if (lppl_ensemble_params(ensemble, 0, &best) != LPPL_STATUS_OK) return 8;
    if (fabs(best.tc - 300.0) > 0.5) return 9;

    lppl_ensemble_free(ensemble);
    lppl_series_free(series);
    printf("ok\n");
    return 0;
}
"#;

#[test]
fn c_program_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let include = manifest.join("include");
    assert!(include.join("lppl.h").exists(), "header not generated");

    // The staticlib lands in the profile directory two levels above the
    // test executable.
    let mut lib_dir = PathBuf::from(std::env::current_exe().unwrap());
    lib_dir.pop(); // test binary name
    lib_dir.pop(); // deps/
    let staticlib = lib_dir.join("liblppl_ffi.a");
    assert!(
        staticlib.exists(),
        "static library missing at {}",
        staticlib.display()
    );

    let dir = tempfile::tempdir().unwrap();
    let c_path = dir.path().join("smoke.c");
    let bin_path = dir.path().join("smoke");
    std::fs::write(&c_path, C_PROGRAM).unwrap();

    let compile = Command::new("cc")
        .arg(&c_path)
        .arg("-I")
        .arg(&include)
        .arg(staticlib)
        .args(["-lm", "-lpthread", "-ldl"])
        .arg("-o")
        .arg(&bin_path)
        .output()
        .unwrap();
    assert!(
        compile.status.success(),
        "cc failed: {}",
        String::from_utf8_lossy(&compile.stderr)
    );

    let run = Command::new(&bin_path).output().unwrap();
    assert!(
        run.status.success(),
        "smoke binary exited with {:?}: {}",
        run.status.code(),
        String::from_utf8_lossy(&run.stderr)
    );
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "ok");
}
