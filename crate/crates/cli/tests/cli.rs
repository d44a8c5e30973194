use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = "seed = 5\n[model]\nsize = \"tiny\"\n[surfaces]\ncount = 5\n[maps]\nlr_size = 16\nsr_factor = 4\n[camera]\nheight = 48\nwidth = 48\n";

fn gramhd(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gramhd"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = gramhd(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn tiny_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
    dir
}

fn pipeline(dir: &Path) {
    for cmd in [
        &["gen-scene"][..],
        &["grid"],
        &["superres"],
        &["render", "--depth"],
        &["extract-mesh", "--resolution", "24", "--view-size", "24", "--views", "6", "--textured"],
    ] {
        let mut args = vec!["--config", "tiny.toml"];
        args.extend_from_slice(cmd);
        ok(dir, &args);
    }
}

#[test]
fn help_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let help = gramhd(dir.path(), &["render", "--help"]);
    assert_eq!(help.status.code(), Some(0));
    let text = String::from_utf8_lossy(&help.stdout);
    assert!(text.contains("Usage") && text.contains("--yaw") && text.contains("--cached"));

    assert_eq!(gramhd(dir.path(), &["render", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(gramhd(dir.path(), &["no-such-command"]).status.code(), Some(2));
    assert_eq!(gramhd(dir.path(), &["orbit", "--frames", "many"]).status.code(), Some(2));
    assert_eq!(gramhd(dir.path(), &[]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = gramhd(dir.path(), &["render"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("gen-scene"));

    std::fs::write(dir.path().join("bad.toml"), "seed = 1\n[maps]\nsr_factor = 3\n").unwrap();
    let bad = gramhd(dir.path(), &["--config", "bad.toml", "gen-scene"]);
    assert_eq!(bad.status.code(), Some(1));
    let err = String::from_utf8_lossy(&bad.stderr);
    assert!(err.contains("line 3") && err.contains("maps.sr_factor"), "{err}");

    std::fs::write(dir.path().join("unknown.toml"), "[camera]\nzoom = 2\n").unwrap();
    assert_eq!(gramhd(dir.path(), &["--config", "unknown.toml", "gen-scene"]).status.code(), Some(1));
}

#[test]
fn orbit_writes_zero_padded_frames_and_epi() {
    let dir = tiny_dir();
    ok(dir.path(), &["--config", "tiny.toml", "gen-scene"]);
    ok(dir.path(), &["--config", "tiny.toml", "grid"]);
    ok(
        dir.path(),
        &["--config", "tiny.toml", "orbit", "--frames", "30", "--yaw-range", "0.4", "--size", "16", "--epi"],
    );
    let frames = dir.path().join("out/frames");
    let mut names: Vec<String> = std::fs::read_dir(&frames)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names.len(), 30);
    assert_eq!(names[0], "frame_000.png");
    assert_eq!(names[29], "frame_029.png");
    let epi = image_size(&dir.path().join("out/epi.png"));
    assert_eq!(epi, (16, 30));
}

fn image_size(path: &Path) -> (u32, u32) {
    let bytes = std::fs::read(path).unwrap();
    assert_eq!(&bytes[1..4], b"PNG");
    let w = u32::from_be_bytes(bytes[16..20].try_into().unwrap());
    let h = u32::from_be_bytes(bytes[20..24].try_into().unwrap());
    (w, h)
}

#[test]
fn manifests_hash_every_output() {
    let dir = tiny_dir();
    pipeline(dir.path());
    let out = dir.path().join("out");
    for cmd in ["gen-scene", "grid", "superres", "render", "extract-mesh"] {
        let text = std::fs::read_to_string(out.join(format!("{cmd}.manifest.json"))).unwrap();
        let m = gramhd::io::Manifest::load(&out.join(format!("{cmd}.manifest.json"))).unwrap();
        assert_eq!(m.command, cmd);
        assert_eq!(m.seed, 5);
        assert_eq!(m.config_sha256.len(), 64, "{text}");
        assert!(!m.outputs.is_empty());
        for o in &m.outputs {
            let bytes = std::fs::read(out.join(&o.path)).unwrap();
            assert_eq!(bytes.len() as u64, o.bytes);
            assert_eq!(gramhd::io::sha256_hex(&bytes), o.sha256);
        }
    }
    let extract = gramhd::io::Manifest::load(&out.join("extract-mesh.manifest.json")).unwrap();
    let paths: Vec<&str> = extract.outputs.iter().map(|o| o.path.as_str()).collect();
    assert!(paths.contains(&"proxy.obj") && paths.contains(&"scene.obj") && paths.contains(&"scene.mtl"));
}

#[test]
fn same_seed_gives_identical_files() {
    let (a, b) = (tiny_dir(), tiny_dir());
    pipeline(a.path());
    pipeline(b.path());
    for f in ["model.grmh", "maps_lr.grms", "maps_hr.grms", "render.png", "depth.grmd", "proxy.obj", "scene.obj", "scene_surface_02.png"] {
        let x = std::fs::read(a.path().join("out").join(f)).unwrap();
        let y = std::fs::read(b.path().join("out").join(f)).unwrap();
        assert!(x == y, "{f} differs between runs");
    }

    let c = tiny_dir();
    ok(c.path(), &["--config", "tiny.toml", "--seed", "6", "gen-scene"]);
    let x = std::fs::read(a.path().join("out/model.grmh")).unwrap();
    let y = std::fs::read(c.path().join("out/model.grmh")).unwrap();
    assert_ne!(x, y);
}

#[test]
fn eval_and_bench_reports() {
    let dir = tiny_dir();
    pipeline(dir.path());
    let out = ok(dir.path(), &["--config", "tiny.toml", "eval"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("consistency_loss = "));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/eval.json")).unwrap()).unwrap();
    for key in ["consistency_image", "consistency_maps", "consistency_loss", "psnr_cached_vs_rays_db", "ssim_cached_vs_rays"] {
        assert!(json[key].is_number(), "{key}");
    }
    let file = std::fs::read_to_string(dir.path().join("out/eval.txt")).unwrap();
    assert_eq!(file.lines().count(), json.as_object().unwrap().len());

    let out = ok(dir.path(), &["--config", "tiny.toml", "bench", "--frames", "3", "--size", "32"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("fps"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/bench.json")).unwrap()).unwrap();
    assert!(json["fps"].as_f64().unwrap() > 0.0);
    assert_eq!(json["threads"].as_f64(), Some(1.0));
}

#[test]
fn thread_override_is_validated() {
    let dir = tiny_dir();
    let out = Command::new(env!("CARGO_BIN_EXE_gramhd"))
        .current_dir(dir.path())
        .env("GRAMHD_THREADS", "zero")
        .args(["--config", "tiny.toml", "gen-scene"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = Command::new(env!("CARGO_BIN_EXE_gramhd"))
        .current_dir(dir.path())
        .env("GRAMHD_THREADS", "2")
        .args(["--config", "tiny.toml", "gen-scene"])
        .output()
        .unwrap();
    assert!(out.status.success());
}
