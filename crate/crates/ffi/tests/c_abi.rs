use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use metateach::session::SessionLog;
use metateach_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(mt_last_error_message()) }.to_string_lossy().into_owned()
}

fn new_session(mode: MtMode, seed: u64) -> *mut MtSession {
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { mt_session_new(mode, seed, ptr::null(), &mut s) }, MtStatus::Ok);
    assert!(!s.is_null());
    s
}

fn plain_feedback(pref: MtPreference) -> MtFeedback {
    MtFeedback {
        preference: pref,
        guidance_target: MT_TARGET_NONE,
        correction_target: MT_TARGET_NONE,
        fallback_save_target: MT_TARGET_NONE,
        exploration_level: 3,
        speed_level: 3,
        fallback_load: false,
    }
}

#[test]
fn version_strings() {
    let v = unsafe { CStr::from_ptr(mt_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
    let p = unsafe { CStr::from_ptr(mt_protocol_version()) }.to_str().unwrap();
    assert_eq!(p, metateach::PROTOCOL_VERSION);
}

#[test]
fn full_session_through_handles() {
    let s = new_session(MtMode::FullModality, 3);
    let mut trials = 0;
    unsafe {
        while mt_session_phase(s) != MtPhase::Finished {
            assert_eq!(mt_session_present_pair(s), MtStatus::Ok);
            assert_eq!(mt_session_phase(s), MtPhase::AwaitingFeedback);
            let mut a = MtOutcome::default();
            let mut b = MtOutcome::default();
            assert_eq!(mt_session_outcome(s, 0, &mut a), MtStatus::Ok);
            assert_eq!(mt_session_outcome(s, 1, &mut b), MtStatus::Ok);
            assert!(a.distance_to_hole >= 0.0 && b.distance_to_hole >= 0.0);
            let pref = if a.distance_to_hole <= b.distance_to_hole {
                MtPreference::First
            } else {
                MtPreference::Second
            };
            assert_eq!(mt_session_submit_feedback(s, &plain_feedback(pref)), MtStatus::Ok);
            trials += 1;
        }
        assert_eq!(mt_session_trial_index(s), trials);
        assert_eq!(trials, metateach::DEFAULT_TRIALS);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        let c = CString::new(path.to_str().unwrap()).unwrap();
        assert_eq!(mt_session_write_log(s, c.as_ptr()), MtStatus::Ok);
        mt_session_free(s);
        let log = SessionLog::read(&path).unwrap();
        log.validate_finished().unwrap();
        log.verify_replay().unwrap();
    }
}

#[test]
fn positions_report_required_length() {
    let s = new_session(MtMode::FullModality, 1);
    unsafe {
        let mut written = 0usize;
        assert_eq!(mt_session_positions(s, 0, ptr::null_mut(), 0, &mut written), MtStatus::WrongPhase);
        assert_eq!(mt_session_present_pair(s), MtStatus::Ok);
        assert_eq!(mt_session_positions(s, 0, ptr::null_mut(), 0, &mut written), MtStatus::BufferTooSmall);
        assert_eq!(written, 200);
        let mut buf = vec![0.0; written];
        assert_eq!(mt_session_positions(s, 1, buf.as_mut_ptr(), buf.len(), &mut written), MtStatus::Ok);
        assert!(buf.iter().all(|v| v.is_finite()));
        assert_eq!(mt_session_positions(s, 2, buf.as_mut_ptr(), buf.len(), &mut written), MtStatus::InvalidArgument);
        mt_session_free(s);
    }
}

#[test]
fn error_codes_cross_the_boundary() {
    unsafe {
        let s = new_session(MtMode::PreferenceOnly, 1);
        let fb = plain_feedback(MtPreference::First);
        assert_eq!(mt_session_submit_feedback(s, &fb), MtStatus::WrongPhase);
        assert!(last_error().contains("phase"));

        assert_eq!(mt_session_present_pair(s), MtStatus::Ok);
        let mut guided = fb;
        guided.guidance_target = 0;
        assert_eq!(mt_session_submit_feedback(s, &guided), MtStatus::Capability);
        let mut bad = fb;
        bad.speed_level = 9;
        assert_eq!(mt_session_submit_feedback(s, &bad), MtStatus::Validation);
        let mut bad_target = fb;
        bad_target.correction_target = 4;
        assert_eq!(mt_session_submit_feedback(s, &bad_target), MtStatus::InvalidArgument);

        let pts = [0.0f64; 15];
        assert_eq!(mt_session_set_demonstration(s, pts.as_ptr(), 5), MtStatus::Capability);

        assert_eq!(mt_session_submit_feedback(s, &fb), MtStatus::Ok);
        assert_eq!(last_error(), "");
        mt_session_free(s);

        assert_eq!(mt_session_present_pair(ptr::null_mut()), MtStatus::NullPointer);
        assert_eq!(mt_session_new(MtMode::FullModality, 0, ptr::null(), ptr::null_mut()), MtStatus::NullPointer);
        let bad_toml = CString::new("[session]\ntrials = 0\n").unwrap();
        let mut out = ptr::null_mut();
        assert_eq!(mt_session_new(MtMode::FullModality, 0, bad_toml.as_ptr(), &mut out), MtStatus::Config);
        assert!(out.is_null());
        mt_session_free(ptr::null_mut());
    }
}

#[test]
fn fallback_load_without_save_is_reported() {
    let s = new_session(MtMode::FullModality, 5);
    unsafe {
        assert_eq!(mt_session_present_pair(s), MtStatus::Ok);
        let mut fb = plain_feedback(MtPreference::Both);
        fb.fallback_load = true;
        assert_eq!(mt_session_submit_feedback(s, &fb), MtStatus::NoFallback);
        fb.fallback_save_target = 1;
        assert_eq!(mt_session_submit_feedback(s, &fb), MtStatus::Ok);
        mt_session_free(s);
    }
}

#[test]
fn staged_demonstration_sets_the_mean() {
    let s = new_session(MtMode::FullModality, 2);
    unsafe {
        assert_eq!(mt_session_present_pair(s), MtStatus::Ok);
        let pts: Vec<f64> = (0..10)
            .flat_map(|i| {
                let t = i as f64 / 9.0;
                [t * 2.0, 0.1 * t, 0.05 * (1.0 - t)]
            })
            .collect();
        assert_eq!(mt_session_set_demonstration(s, pts.as_ptr(), 10), MtStatus::Ok);
        assert_eq!(mt_session_submit_feedback(s, &plain_feedback(MtPreference::First)), MtStatus::Ok);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("demo.jsonl");
        let c = CString::new(path.to_str().unwrap()).unwrap();
        assert_eq!(mt_session_write_log(s, c.as_ptr()), MtStatus::Ok);
        mt_session_free(s);
        let log = SessionLog::read(&path).unwrap();
        let trials = log.trials().unwrap();
        let fb = trials[0].feedback.as_ref().unwrap();
        let demo = fb.demo_weights.as_ref().expect("demonstration was attached");
        let snap = trials[0].snapshot.as_ref().unwrap();
        assert_eq!(&snap.learner.dist.mean, demo);
        assert!(snap.learner.history.is_empty());
    }
}

#[test]
fn json_feedback_matches_wire_format() {
    let s = new_session(MtMode::FullModality, 4);
    unsafe {
        assert_eq!(mt_session_present_pair(s), MtStatus::Ok);
        let bad = CString::new(r#"{"preference":"sideways"}"#).unwrap();
        assert_eq!(mt_session_submit_feedback_json(s, bad.as_ptr()), MtStatus::Validation);
        let ok = CString::new(r#"{"preference":"second","guidance_target":"second","exploration_level":2}"#).unwrap();
        assert_eq!(mt_session_submit_feedback_json(s, ok.as_ptr()), MtStatus::Ok);
        assert_eq!(mt_session_trial_index(s), 1);
        mt_session_free(s);
    }
}

#[test]
fn scripted_runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let p1 = dir.path().join("a.jsonl");
    let p2 = dir.path().join("b.jsonl");
    for p in [&p1, &p2] {
        let c = CString::new(p.to_str().unwrap()).unwrap();
        assert_eq!(unsafe { mt_run_scripted(MtMode::FullModality, 9, false, c.as_ptr()) }, MtStatus::Ok);
    }
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
}

#[test]
fn statistics_entry_points() {
    let a = [1.0, 2.0, 3.0];
    let b = [4.0, 5.0, 6.0];
    let mut mw = MtMannWhitney::default();
    unsafe {
        assert_eq!(mt_mann_whitney(a.as_ptr(), 3, b.as_ptr(), 3, &mut mw), MtStatus::Ok);
        assert_eq!(mw.u, 0.0);
        assert!(mw.exact);
        assert!((mw.p_less - 0.05).abs() < 1e-15);
        assert_eq!(mt_mann_whitney(a.as_ptr(), 0, b.as_ptr(), 3, &mut mw), MtStatus::EmptyGroup);

        let (mut rho, mut p) = (0.0, 0.0);
        assert_eq!(mt_spearman(a.as_ptr(), b.as_ptr(), 3, &mut rho, &mut p), MtStatus::Ok);
        assert_eq!(rho, 1.0);
        let c = [2.0, 2.0, 2.0];
        assert_eq!(
            mt_spearman(a.as_ptr(), c.as_ptr(), 3, &mut rho, &mut p),
            MtStatus::UndefinedCorrelation
        );
    }
}

#[test]
fn header_is_generated_and_current() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/metateach.h")).unwrap();
    for sym in [
        "MtSession",
        "mt_session_new",
        "mt_session_free",
        "mt_session_submit_feedback",
        "mt_last_error_message",
        "MT_STATUS_CAPABILITY",
        "MT_TARGET_NONE",
    ] {
        assert!(header.contains(sym), "header lacks {sym}");
    }
}

/// Compiles the C example against the header and static library.
#[test]
fn c_program_links_and_runs() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("no C compiler found, skipping");
        return;
    }
    let target_dir = std::env::current_exe()
        .unwrap()
        .parent()
        .and_then(|p| p.parent())
        .map(PathBuf::from)
        .unwrap();
    let lib = target_dir.join("libmetateach_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let out = tempfile::tempdir().unwrap();
    let exe = out.path().join("smoke");
    let status = Command::new(&cc)
        .arg(manifest.join("examples/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let run = Command::new(&exe).output().unwrap();
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(run.status.success(), "smoke failed: {stdout} {}", String::from_utf8_lossy(&run.stderr));
    assert!(stdout.contains("trials=40"), "{stdout}");
    assert!(stdout.contains("protocol=metateach/1"), "{stdout}");
}
