//! Driving the command layer from code: a config template, a dry run and
//! an `orbits` run into a temporary directory.

use conormal_trace::cli::{run, RunConfig};

fn main() {
    let mut cfg = RunConfig::template("bathtub1d");
    cfg.window.time_center = 2.0;
    cfg.window.time_width = 0.07;
    let dir = std::env::temp_dir().join("ctrace-example");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bathtub.toml");
    std::fs::write(&path, cfg.emit()).unwrap();
    println!("{}", cfg.emit());

    let args = |cmd: &str, extra: &[&str]| {
        let mut v = vec!["ctrace".to_string(), cmd.into(), "--config".into(), path.display().to_string()];
        v.extend(["--out".into(), dir.join("out").display().to_string()]);
        v.extend(extra.iter().map(|s| s.to_string()));
        v
    };
    println!("dry run exit {}", run(args("predict", &["--dry-run"])));
    println!("orbits exit {}", run(args("orbits", &[])));
    println!("{}", std::fs::read_to_string(dir.join("out/spectrum.csv")).unwrap());
}
