"""Recompute the published XOR 3 numbers from the training counts and print them
beside the published values."""

import argparse
import json

import numpy as np

from bellcert.core import JointDistribution
from bellcert.data import (XOR3_CHSH, XOR3_EPS_EXT, XOR3_EPS_FIN, XOR3_EPS_P, XOR3_EXPECTED_T, XOR3_KAPPA, XOR3_M,
                           XOR3_N, XOR3_NS_FIT_GRID, XOR3_PR_WEIGHT, XOR3_RATE, XOR3_SEED_BITS, XOR3_T_BITS,
                           XOR3_VTHRESH, xor3_bell_function, xor3_ns_fit, xor3_training_counts)
from bellcert.entropy import ProtocolParams, compute_delta
from bellcert.extractor import max_output_bits, plan_for_protocol
from bellcert.mle import fit_nonsignaling
from bellcert.pbr import asymptotic_rate, choose_vthresh, compute_m, optimize_bell_function
from bellcert.pipeline import resolve_error_budget
from bellcert.pm import PmBoundInputs, chsh_function, pm_min_trials, pr_weight


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", help="also write the rows as JSON")
    args = ap.parse_args()

    fit = fit_nonsignaling(xor3_training_counts())
    q = fit.q
    published_t = xor3_bell_function()
    t = optimize_bell_function(q)
    m_pub = compute_m(published_t).m
    cert = compute_delta(ProtocolParams.from_vthresh(XOR3_N, XOR3_M, XOR3_EPS_P, XOR3_VTHRESH))
    xplan = plan_for_protocol(XOR3_N, XOR3_T_BITS, XOR3_EPS_EXT, XOR3_KAPPA, cert.delta_log2)
    eps_p, eps_ext = resolve_error_budget(XOR3_EPS_FIN, XOR3_KAPPA, 9.0)
    dec = pr_weight(xor3_ns_fit())

    rows = [
        ("max |q - published fit|", float(np.abs(q.grid() - JointDistribution.from_grid(XOR3_NS_FIT_GRID).grid()).max()), 0.0),
        ("m of published T", m_pub, XOR3_M),
        ("m of our T", compute_m(t).m, None),
        ("E(ln T) ours - published", t.log_expectation(q) - published_t.log_expectation(q), None),
        ("E(T) published T under fit", published_t.expectation(q), XOR3_EXPECTED_T),
        ("v_thresh (CLT, 0.95)", choose_vthresh(published_t, xor3_ns_fit(), XOR3_N).v_thresh, XOR3_VTHRESH),
        ("-log2 delta", cert.entropy_bits, 375.9),
        ("max output bits", max_output_bits(cert.delta_log2, XOR3_KAPPA, XOR3_EPS_EXT), XOR3_T_BITS),
        ("seed length d", xplan.d, XOR3_SEED_BITS),
        ("eps_p (raw 9:1)", eps_p, XOR3_EPS_P),
        ("eps_ext (raw 9:1)", eps_ext, XOR3_EPS_EXT),
        ("asymptotic rate", asymptotic_rate(published_t, xor3_ns_fit(), m_pub), XOR3_RATE),
        ("PR weight p", dec.p, XOR3_PR_WEIGHT),
        ("E(T^c)", float(np.sum(xor3_ns_fit().p * chsh_function())), XOR3_CHSH),
        ("PM min trials (eps 0.05)", pm_min_trials(PmBoundInputs(dec.p, 0.05)), 2.4e10),
    ]
    for name, ours, published in rows:
        pub = "" if published is None else f"{published:.10g}"
        print(f"{name:30s} {ours:<22.10g} {pub}")
    if args.out:
        with open(args.out, "w") as f:
            json.dump([{"quantity": n, "ours": o, "published": p} for n, o, p in rows], f, indent=2)


if __name__ == "__main__":
    main()
