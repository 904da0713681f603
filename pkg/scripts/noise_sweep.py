"""LSD vs. baseline Recall@1 and pi_ratio across symmetric label-noise ratios."""

from _common import base_config, parser, say, write_rows

from lsdml.experiments import median_gap, paired_runs, wins


def main():
    p = parser(__doc__)
    p.add_argument("--ratios", default="0.1,0.2,0.3,0.4")
    args = p.parse_args()
    base, seeds = base_config(args), range(args.seeds)
    rows = []
    for r in (float(x) for x in args.ratios.split(",")):
        res = paired_runs(base, {
            "baseline": ["lsd.enabled=false", f"data.noise_ratio={r}"],
            "lsd": [f"data.noise_ratio={r}"],
        }, seeds)
        say(f"noise {r:.2f}: median R@1 gap {median_gap(res['lsd'], res['baseline']):+.4f} "
            f"(LSD ahead on {wins(res['lsd'], res['baseline'])}/{len(seeds)} seeds), "
            f"train pi_ratio higher on {wins(res['lsd'], res['baseline'], 'train_pi_ratio')}/{len(seeds)}")
        for s, b, l in zip(seeds, res["baseline"], res["lsd"]):
            rows.append({"noise_ratio": r, "seed": s, "baseline_r1": b["recall_at_1"], "lsd_r1": l["recall_at_1"],
                         "baseline_train_pi_ratio": b["train_pi_ratio"], "lsd_train_pi_ratio": l["train_pi_ratio"]})
    write_rows(args.out, rows)


if __name__ == "__main__":
    main()
