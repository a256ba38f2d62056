//! Running candidate programs under wall-clock and memory limits.

use codevolve::sandbox::{ResourceLimits, Sandbox, SandboxConfig};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let sandbox = Sandbox::new(SandboxConfig::shell(), 2);

    let ok = "#!/bin/sh\necho building\nprintf '{\"heights\": [1, 2, 1]}' > \"$CODEVOLVE_ARTIFACT\"\n";
    let o = sandbox.run(ok, &ResourceLimits::new(5.0, 1 << 30));
    println!("ok: {:?}, artifact {:?}", o.status, o.artifact.as_deref().map(String::from_utf8_lossy));

    let crash = "#!/bin/sh\necho 'no construction' >&2\nexit 3\n";
    let o = sandbox.run(crash, &ResourceLimits::new(5.0, 1 << 30));
    println!("crash: {:?} exit {:?} stderr {:?}", o.status, o.exit_code, o.stderr.text.trim());

    let slow = "#!/bin/sh\nsleep 30 &\nwait\n";
    let o = sandbox.run(slow, &ResourceLimits::new(0.3, 1 << 30));
    println!("slow: {:?} after {:.2}s", o.status, o.wall_time);
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
