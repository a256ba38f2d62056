//! Applying model responses to a program: edit blocks, whole-file rewrites
//! and malformed replies.

use codevolve::diff::{apply_response, parse_response, render, EditBlock};

const PROGRAM: &str = "import json\n\ndef construct():\n    return [0.5, 0.5]\n\nprint(json.dumps(construct()))\n";

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let blocks = vec![
        EditBlock { search: "    return [0.5, 0.5]".into(), replace: "    return [0.25, 1.0, 0.25]".into() },
        EditBlock { search: "import json".into(), replace: "import json\nimport math".into() },
    ];
    let response = format!("Taller middle step.\n{}", render(&blocks));
    let parsed = parse_response(&response)?;
    println!("{}", apply_response(PROGRAM, &parsed)?);

    let rewrite = "Start over:\n```python\nprint('[1.0]')\n```\n";
    println!("rewrite -> {:?}", apply_response(PROGRAM, &parse_response(rewrite)?)?);

    let broken = "<<<<<<< SEARCH\nreturn 0\n=======\nreturn 1\n";
    println!("broken -> {}", parse_response(broken).unwrap_err());

    let stale = render(&[EditBlock { search: "return [9]".into(), replace: "return [1]".into() }]);
    println!("stale -> {}", apply_response(PROGRAM, &parse_response(&stale)?).unwrap_err());
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
