"""Re-tune the regularizer weight: LSD - baseline Recall@1 per lambda at one noise ratio."""

from _common import base_config, parser, say, write_rows

from lsdml.experiments import median_gap, paired_runs, wins


def main():
    p = parser(__doc__)
    p.add_argument("--lambdas", default="100,1000,10000,30000,100000")
    p.add_argument("--noise", type=float, default=0.3)
    p.set_defaults(seeds=5)
    args = p.parse_args()
    base, seeds = base_config(args), range(args.seeds)
    noise = f"data.noise_ratio={args.noise}"
    lams = [float(x) for x in args.lambdas.split(",")]
    arms = {"baseline": ["lsd.enabled=false", noise], **{lam: [f"lsd.lam={lam}", noise] for lam in lams}}
    res = paired_runs(base, arms, seeds)
    rows = []
    for lam in lams:
        say(f"lambda {lam:g}: median gap {median_gap(res[lam], res['baseline']):+.4f}, "
            f"ahead on {wins(res[lam], res['baseline'])}/{len(seeds)}")
        rows += [{"lambda": lam, "seed": s, "gap": g["recall_at_1"] - b["recall_at_1"]}
                 for s, g, b in zip(seeds, res[lam], res["baseline"])]
    write_rows(args.out, rows)


if __name__ == "__main__":
    main()
