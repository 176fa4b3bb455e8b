"""
Conformance report
Assembles identity-check results into one status document for `verify`
"""
from typing import Dict, List

import pandas as pd

from app.services.diagnostics import CheckReport


def get_identity_status(checks: List[CheckReport]) -> Dict:
    """Pass/fail counts of the identity checks, grouped by identity"""
    by_identity: Dict[str, Dict[str, int]] = {}
    for check in checks:
        entry = by_identity.setdefault(check.name, {"total": 0, "passed": 0})
        entry["total"] += 1
        entry["passed"] += int(check.passed)
    passed = sum(int(c.passed) for c in checks)
    return {
        "status": "pass" if passed == len(checks) else "fail",
        "total": len(checks),
        "passed": passed,
        "failed": len(checks) - passed,
        "by_identity": by_identity,
    }


def get_control_status(negative: CheckReport, detected: bool) -> Dict:
    """The Poisson control must be rejected"""
    return {
        "status": "pass" if detected else "fail",
        "detected": detected,
        "check": negative.to_dict(),
    }


def build_conformance_report(result: Dict) -> Dict:
    """Overall status of a verify_grid() run"""
    identity_status = get_identity_status(result["checks"])
    control_status = get_control_status(result["negative_control"], result["control_detected"])

    overall = "pass"
    if identity_status["status"] != "pass" or control_status["status"] != "pass":
        overall = "fail"

    return {
        "overall_status": overall,
        "components": {
            "identities": identity_status,
            "negative_control": control_status,
        },
        "checks": [c.to_dict() for c in result["checks"]],
    }


def checks_frame(checks: List[CheckReport]) -> pd.DataFrame:
    rows = []
    for c in checks:
        ctx = c.context.get("params", {})
        rows.append({
            "name": c.name,
            "z": ctx.get("z"),
            "rho_b": c.context.get("window", {}).get("hi"),
            "lhs": c.lhs.mean,
            "rhs": c.rhs.mean,
            "difference": c.difference,
            "pooled_se": c.pooled_se,
            "relative_error": c.relative_error,
            "passed": c.passed,
        })
    return pd.DataFrame(rows)
