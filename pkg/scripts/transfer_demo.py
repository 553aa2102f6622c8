"""Pretrain on the synthetic source task, swap the head, and compare fine-tuning with scratch training."""
import argparse

from adaptwave.train import desk_config, split_validation, train_run, transfer_swap_head
from adaptwave.train.synthetic import transfer_pair


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--pretrain-epochs", type=int, default=20)
    ap.add_argument("--epochs", type=int, default=30)
    args = ap.parse_args()
    seed = args.seed

    src, tgt = transfer_pair(n_source=120, n_target=80, seed=seed)
    s_tr, s_va = split_validation(sorted(set(src.source_ids)), 0.2, seed)
    pre = train_run(desk_config(seed=seed, epochs=args.pretrain_epochs), src.by_sources(s_tr), src.by_sources(s_va))
    print(f"source: best val acc {max(pre.val_curve):.3f}")

    labels = ["chirp", "tone"]
    cfg = desk_config(seed=seed, epochs=args.epochs)
    init = transfer_swap_head(pre.best, len(labels), labels, seed=seed)
    init.config = cfg
    t_tr, t_va = split_validation(sorted(set(tgt.source_ids)), 0.6, seed)
    train, val = tgt.by_sources(t_tr), tgt.by_sources(t_va)
    ft = train_run(cfg, train, val, labels, init=init)
    sc = train_run(cfg, train, val, labels)

    print("epoch  fine-tune  scratch")
    for a, b in zip(ft.history, sc.history):
        print(f"{a.epoch:5d}  {a.val_accuracy:9.3f}  {b.val_accuracy:7.3f}")
    target = max(sc.val_curve)
    print(f"scratch best {target:.3f}: reached at epoch {sc.epochs_to(target)} from scratch, "
          f"{ft.epochs_to(target)} when fine-tuning")


if __name__ == "__main__":
    main()
