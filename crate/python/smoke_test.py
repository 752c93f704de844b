"""Smoke test for the commgraph_py extension.

Build the library first:

    cargo build -p commgraph-py --release

then run `python3 python/smoke_test.py`. The script copies the built shared
library into a temporary directory as `commgraph_py.so` and imports it.
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def find_library():
    for profile in ("release", "debug"):
        lib = ROOT / "target" / profile / "libcommgraph_py.so"
        if lib.exists():
            return lib
    sys.exit("libcommgraph_py.so not found; run `cargo build -p commgraph-py --release`")


def main():
    tmp = Path(tempfile.mkdtemp())
    shutil.copy(find_library(), tmp / "commgraph_py.so")
    sys.path.insert(0, str(tmp))
    import commgraph_py as cg

    ds = cg.synth_dataset(seed=7)
    summary = ds.summary()
    assert summary["ip_addresses"] == 60 and summary["relations"] == 8, summary
    print(ds)

    ds.save(tmp / "synth.dataset")
    again = cg.Dataset.load(tmp / "synth.dataset")
    assert again.train_triplets() == ds.train_triplets()

    model = cg.train(ds, "rgcn", epochs=40)
    log = model.training_log
    assert len(log) == 40 and log[-1] < log[0], log[:3]
    assert model.hyperparams()["hidden_dim"] == 100
    print(model, "loss", round(log[0], 4), "->", round(log[-1], 4))

    server, relation, client = ds.train_triplets()[0]
    verdict, raw, rank = model.score(server, relation, client)
    assert verdict == "WHITELISTED" and raw == math.inf and rank is None

    s, p, c = ds.test_triplets()[0]
    verdict, raw, rank = model.score(s, p, c)
    assert verdict == "SCORED" and math.isfinite(raw) and 0 < rank <= 2

    verdict, raw, _ = model.score("192.168.9.9", relation, client)
    assert verdict == "UNSEEN" and raw == -math.inf

    try:
        model.score(server, relation, server)
    except ValueError:
        pass
    else:
        raise AssertionError("identical endpoints must be rejected")

    batch = model.score_many([(server, relation, client), (server, relation, server), (s, p, c)])
    assert batch[0][0] == "WHITELISTED" and batch[1] is None and batch[2][0] == "SCORED"

    model.save(tmp / "m.model")
    loaded = cg.Model.load(tmp / "m.model")
    assert loaded.score(s, p, c) == model.score(s, p, c)
    assert loaded.embedding(server) == model.embedding(server)

    assert cg.roc_auc([3.0, 4.0], [1.0, 2.0]) == 1.0
    assert cg.roc_auc([1.0], [1.0]) == 0.5
    assert cg.mrr([1.0, 2.0, 4.0]) == (1 + 0.5 + 0.25) / 3
    assert cg.hits_at_n([1.0, 2.0, 4.0], 3) == 2 / 3

    results = cg.evaluate(ds, methods="1st-order,random", anomaly_count=100)
    assert [r["method"] for r in results] == ["1st-order", "random"]
    for r in results:
        print(r)

    shutil.rmtree(tmp)
    print("smoke test passed")


if __name__ == "__main__":
    main()
