"""Final Recall@1 across temperatures; lambda is held fixed so the weight is tau^2 * lambda."""

import statistics

from _common import base_config, parser, say, write_rows

from lsdml.experiments import paired_runs, spread


def main():
    p = parser(__doc__)
    p.add_argument("--taus", default="0.1,1,2,4,8")
    p.set_defaults(seeds=5)
    args = p.parse_args()
    base, seeds = base_config(args), range(args.seeds)
    taus = [float(x) for x in args.taus.split(",")]
    res = paired_runs(base, {t: [f"lsd.tau={t}"] for t in taus}, seeds)
    med = {t: statistics.median(r["recall_at_1"] for r in res[t]) for t in taus}
    for t in taus:
        say(f"tau {t:g}: median R@1 {med[t]:.4f}")
    high = [med[t] for t in taus if t >= 1]
    if high and min(taus) < 1:
        say(f"spread over tau >= 1: {spread(high):.4f}; "
            f"|R@1(tau=1) - R@1(tau={min(taus):g})| = {abs(med.get(1.0, high[0]) - med[min(taus)]):.4f}")
    write_rows(args.out, [{"tau": t, "seed": s, "recall_at_1": r["recall_at_1"]}
                          for t in taus for s, r in zip(seeds, res[t])])


if __name__ == "__main__":
    main()
