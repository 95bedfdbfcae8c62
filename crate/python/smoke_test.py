#!/usr/bin/env python3
"""Smoke test for the pfaas_py extension module.

Builds nothing itself: it loads the cdylib produced by
`cargo build -p pfaas-py` straight from target/ and checks the Python
surface end to end against known-good values.
"""

import importlib.util
import pathlib
import sys

FIXTURE_HEX = "4e32010100000001001901000f696d73692d3031323334353637383905000401000001"


def load_module():
    root = pathlib.Path(__file__).resolve().parents[1]
    candidates = [
        root / "target" / profile / name
        for profile in ("release", "debug")
        for name in ("libpfaas_py.so", "pfaas_py.so", "libpfaas_py.dylib")
    ]
    for candidate in candidates:
        if candidate.exists():
            spec = importlib.util.spec_from_file_location("pfaas_py", candidate)
            module = importlib.util.module_from_spec(spec)
            spec.loader.exec_module(module)
            return module
    sys.exit("pfaas_py cdylib not found; run `cargo build -p pfaas-py` first")


def check(label, condition):
    if not condition:
        sys.exit(f"FAIL: {label}")
    print(f"ok: {label}")


def main():
    pfaas = load_module()

    check("preset names", pfaas.presets() == ["idle", "low", "medium", "high", "burst"])
    spec = pfaas.scenario_spec("low")
    check("low preset resolves", spec["ue_count"] == 100 and spec["pdu_per_ue"] == 1)

    chain = pfaas.registration_chain()
    check(
        "base registration chain",
        len(chain) == 7
        and chain[0] == "amf-initial-registration"
        and chain[-1] == "udm-get-subscriber-data",
    )
    check("extended registration chain", len(pfaas.registration_chain(r17=True)) == 9)

    report = pfaas.run("low")
    check("warm run succeeds", report["success_rate"] == 1.0)
    check("warm registration p50", report["registration"]["p50_us"] == 456_500)
    check("warm session p50", report["pdu"]["p50_us"] == 20_930)
    check("run converges", report["convergence"]["outcome"] == "converged")
    check("runs are deterministic", pfaas.run("low", seed=7) == pfaas.run("low", seed=7))

    cold = pfaas.run("low", cold_storm=True)
    check(
        "eviction shifts p50 by the cold-start delay",
        cold["registration"]["p50_us"] - report["registration"]["p50_us"] == 3_990_000,
    )

    result = pfaas.run_result("low")
    check("ledger holds eight invocations per device", len(result["ledger"]) == 800)
    check(
        "replicas reclaimed after the idle window",
        all(count == 0 for count in result["final_replicas"].values()),
    )

    cost = pfaas.cost_summary()
    evens = cost["break_evens"]
    check("tenant break-even", evens["tenant_break_even"]["tenants"] == 2)
    check("shutdown duty break-even", abs(evens["duty_shutdown"] - 0.64988) < 1e-4)
    check("rate break-even", abs(evens["rate_per_s"] - 609.0) < 0.5)

    message = pfaas.decode_frame(FIXTURE_HEX)
    check(
        "frame decodes",
        message["msg_type"] == "RegistrationRequest"
        and message["supi"] == "imsi-0123456789"
        and message["snssai"] == {"sst": 1, "sd": 1},
    )
    check("frame re-encodes", pfaas.encode_frame(message) == FIXTURE_HEX)

    check("percentile nearest rank", pfaas.percentile(list(range(1, 101)), 95.0) == 95)

    for bad_call, label in [
        (lambda: pfaas.run("weekend"), "unknown scenario raises"),
        (lambda: pfaas.encode_frame({"msg_type": "Hello", "ue_id": 1}), "bad message raises"),
        (lambda: pfaas.run("low", jitter_pct=150.0), "bad jitter raises"),
    ]:
        try:
            bad_call()
        except ValueError:
            print(f"ok: {label}")
        else:
            sys.exit(f"FAIL: {label}")

    print("smoke test passed")


if __name__ == "__main__":
    main()
