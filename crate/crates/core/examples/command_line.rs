// Drive the command-line front end in-process.

use tipshift::cli::run_with;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("tipshift-example-{}", std::process::id()));
    let out = dir.to_str().ok_or("temporary path is not UTF-8")?;
    let (mut stdout, mut stderr) = (Vec::new(), Vec::new());
    let code = run_with(["tipshift", "ebm", "--b", "2.5", "--c", "0.8 + 0.4*lambda", "--out", out], &mut stdout, &mut stderr);
    println!("ebm exited {code}; wrote {}", dir.join("ebm.json").display());
    let (mut stdout, mut stderr) = (Vec::new(), Vec::new());
    let code = run_with(["tipshift", "diagram", "--model", "nope", "--out", out], &mut stdout, &mut stderr);
    print!("unknown model exited {code}: {}", String::from_utf8(stderr)?);
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

fn main() {
    run_example().expect("command-line example");
}
