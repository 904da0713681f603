"""Teacher (soft) targets vs. label-indicator (hard) targets under label noise."""

from _common import base_config, parser, say, write_rows

from lsdml.experiments import median_gap, paired_runs, wins


def main():
    p = parser(__doc__)
    p.add_argument("--noise", type=float, default=0.3)
    args = p.parse_args()
    base, seeds = base_config(args), range(args.seeds)
    noise = f"data.noise_ratio={args.noise}"
    res = paired_runs(base, {"soft": [noise], "hard": [noise, "lsd.targets=hard"]}, seeds)
    say(f"soft - hard median R@1 {median_gap(res['soft'], res['hard']):+.4f}, "
        f"soft ahead on {wins(res['soft'], res['hard'])}/{len(seeds)} seeds")
    write_rows(args.out, [{"seed": s, "soft_r1": a["recall_at_1"], "hard_r1": b["recall_at_1"]}
                          for s, a, b in zip(seeds, res["soft"], res["hard"])])


if __name__ == "__main__":
    main()
