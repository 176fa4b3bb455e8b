#!/usr/bin/env python3
"""
Development helper script for the Polya toolkit
Run common development tasks from one place
"""
import argparse
import subprocess
import sys


def run_command(cmd, cwd=None):
    """Run a shell command"""
    try:
        result = subprocess.run(cmd, shell=True, cwd=cwd, check=True)
        return result.returncode == 0
    except subprocess.CalledProcessError as e:
        print(f"❌ Command failed: {cmd}")
        print(f"Error: {e}")
        return False


def run_tests(slow=False):
    """Run the pytest suite"""
    print("🧪 Running tests...")
    marker = "" if slow else ' -m "not slow"'
    return run_command(f"{sys.executable} -m pytest{marker}")


def quick_verify(out="./reports/quick"):
    """Identity checks at a small sample size (smoke run, not the acceptance size)"""
    print("🔍 Quick verify run...")
    return run_command(f"{sys.executable} -m app.main verify --size 20000 --out {out}")


def selfcheck(out="./reports"):
    """Exact combinatorial identities"""
    print("🧮 Combinatorial self-check...")
    return run_command(f"{sys.executable} -m app.main selfcheck-combinatorics --out {out}")


def acceptance(config="configs/default.json", out="./reports"):
    """Every subcommand at acceptance size"""
    print("📊 Acceptance run...")
    ok = True
    for name in ["selfcheck-combinatorics", "dist-check", "verify", "ensemble", "boundary", "ldp", "posterior"]:
        ok = run_command(f"{sys.executable} -m app.main {name} --config {config} --out {out}") and ok
    print("✅ All passed" if ok else "❌ Some experiments failed")
    return ok


def main():
    parser = argparse.ArgumentParser(description="Polya toolkit development helper")
    parser.add_argument("command", choices=["test", "verify", "selfcheck", "acceptance", "setup"],
                        help="Command to run")
    parser.add_argument("--slow", action="store_true", help="Include slow tests")
    parser.add_argument("--out", default="./reports", help="Report directory")
    parser.add_argument("--config", default="configs/default.json", help="Experiment config")

    args = parser.parse_args()

    if args.command == "test":
        ok = run_tests(args.slow)
    elif args.command == "verify":
        ok = quick_verify(f"{args.out}/quick")
    elif args.command == "selfcheck":
        ok = selfcheck(args.out)
    elif args.command == "acceptance":
        ok = acceptance(args.config, args.out)
    else:
        print("🔧 Setting up...")
        print("1. Installing dependencies...")
        ok = run_command(f"{sys.executable} -m pip install -r requirements.txt")
        if ok:
            print("2. Running self-check...")
            ok = selfcheck(args.out)
    sys.exit(0 if ok else 1)


if __name__ == "__main__":
    main()
