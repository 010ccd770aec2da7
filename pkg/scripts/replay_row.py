"""Recompute the certificate of one dumped experiment instance.

Experiments run with ``instances_dir`` set write each instance as ``<hash>.json``;
the ``instance`` column of every CSV row is that hash.

Usage: python3 scripts/replay_row.py results/instances/<hash>.json [--anchor 0]
"""

import argparse
import json
import sys

from pothull import certify, diameter_linf, load_instance


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("instance")
    ap.add_argument("--anchor", type=int, default=0)
    args = ap.parse_args()
    inst = load_instance(args.instance)
    sol, face, g, cert = certify(inst.rho, inst.mu, inst.cost, anchor=args.anchor)
    certified, exact = diameter_linf(cert)
    print(json.dumps({"hash": inst.content_hash(), "value": sol.value, "certified": certified,
                      "exact": exact}, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
