#!/usr/bin/env python3
"""Regenerates data/ and tests/fixtures/.

Trains a small MLP and CNN on the sklearn digits set, quantizes them to
8-bit integers and writes them in the xbarsec model format, together with
a held-out test set and integer golden scores computed here with numpy.

    python3 tools/make_fixtures.py
"""

import base64
import json
import pathlib

import numpy as np
import torch
from sklearn.datasets import load_digits
from sklearn.model_selection import train_test_split

ROOT = pathlib.Path(__file__).resolve().parent.parent
DATA = ROOT / "data"
FIX = ROOT / "tests" / "fixtures"

SEED = 7
WBITS = 8
ABITS = 8
GOLDEN = 32


def round_half_away(v):
    return np.sign(v) * np.floor(np.abs(v) + 0.5)


def quantize(w, bits):
    qmax = 2 ** (bits - 1) - 1
    m = float(np.max(np.abs(w)))
    scale = m / qmax if m > 0 else 1.0
    q = np.clip(round_half_away(w / scale), -qmax - 1, qmax).astype(np.int64)
    return q, scale


def tensor_doc(q, bits, scale):
    raw = np.asarray(q, dtype="<i4").tobytes()
    return {
        "format": "xbarsec.tensor",
        "shape": list(q.shape),
        "bits": bits,
        "signed": True,
        "scale": scale,
        "data": base64.b64encode(raw).decode(),
    }


def dump(path, doc):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


# ---- integer reference, independent of the C++ code --------------------

def im2col(x, kh, kw, stride, pad):
    h, w, c = x.shape
    xp = np.zeros((h + 2 * pad, w + 2 * pad, c), dtype=np.int64)
    xp[pad:pad + h, pad:pad + w] = x
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (w + 2 * pad - kw) // stride + 1
    rows = []
    for oy in range(oh):
        for ox in range(ow):
            patch = xp[oy * stride:oy * stride + kh, ox * stride:ox * stride + kw, :]
            rows.append(patch.reshape(-1))
    return np.array(rows), (oh, ow)


def act(y, relu, shift):
    if relu:
        y = np.maximum(y, 0)
    return np.clip(y >> shift, 0, 2 ** ABITS - 1)


def forward(layers, x):
    for i, l in enumerate(layers):
        last = i + 1 == len(layers)
        if l["kind"] == "fc":
            y = x.reshape(-1) @ l["q"].astype(np.int64)
        else:
            kh, kw, c, oc = l["q"].shape
            cols, (oh, ow) = im2col(x.reshape(l["in_dims"]), kh, kw, l["stride"], l["padding"])
            y = (cols @ l["q"].reshape(kh * kw * c, oc).astype(np.int64)).reshape(oh, ow, oc)
        x = y if last else act(y, True, l["shift"])
    return x.reshape(-1)


# ---- training ----------------------------------------------------------

def train(net, xtr, ytr, epochs):
    torch.manual_seed(SEED)
    opt = torch.optim.Adam(net.parameters(), lr=3e-3)
    xt = torch.tensor(xtr, dtype=torch.float32)
    yt = torch.tensor(ytr)
    for _ in range(epochs):
        perm = torch.randperm(len(xt))
        for i in range(0, len(xt), 64):
            idx = perm[i:i + 64]
            opt.zero_grad()
            loss = torch.nn.functional.cross_entropy(net(xt[idx]), yt[idx])
            loss.backward()
            opt.step()
    return net


def pick_shifts(layers, xs, ys):
    # Greedy per layer: the requantization shift that keeps the most
    # training accuracy with the shifts chosen so far.
    for i in range(len(layers) - 1):
        best = None
        for s in range(0, 16):
            layers[i]["shift"] = s
            for j in range(i + 1, len(layers) - 1):
                layers[j]["shift"] = layers[i]["shift"]
            acc = np.mean([np.argmax(forward(layers, x)) == y for x, y in zip(xs, ys)])
            if best is None or acc > best[0]:
                best = (acc, s)
        layers[i]["shift"] = best[1]
    return layers


def model_doc(name, layers, in_shape):
    docs = []
    for i, l in enumerate(layers):
        last = i + 1 == len(layers)
        q = l["q"]
        if l["kind"] == "fc":
            g = {"kind": "fc", "in_dims": [q.shape[0]], "out_dims": [q.shape[1]],
                 "kernel_h": 1, "kernel_w": 1, "stride": 1, "padding": 0}
        else:
            kh, kw, c, oc = q.shape
            h, w, _ = l["in_dims"]
            oh = (h + 2 * l["padding"] - kh) // l["stride"] + 1
            ow = (w + 2 * l["padding"] - kw) // l["stride"] + 1
            g = {"kind": "conv", "in_dims": list(l["in_dims"]), "out_dims": [oh, ow, oc],
                 "kernel_h": kh, "kernel_w": kw, "stride": l["stride"], "padding": l["padding"]}
        wfile = f"{name}.layer{i}.json"
        dump(DATA / wfile, tensor_doc(q, WBITS, l["scale"]))
        g.update({"weight_shape": list(q.shape), "weight_bits": WBITS,
                  "activation": "none" if last else "relu",
                  "shift": 0 if last else l["shift"], "weight": wfile})
        docs.append(g)
    dump(DATA / f"{name}.json", {"format": "xbarsec.model", "input_shape": list(in_shape),
                                 "input_bits": ABITS, "num_classes": 10, "layers": docs})


def main():
    digits = load_digits()
    x = (digits.data * 15).astype(np.int64)  # 0..240
    y = digits.target.astype(np.int64)
    xtr, xte, ytr, yte = train_test_split(x, y, test_size=600, random_state=SEED, stratify=y)
    xtr_f = xtr / 255.0

    torch.manual_seed(SEED)
    mlp = train(torch.nn.Sequential(torch.nn.Linear(64, 32, bias=False), torch.nn.ReLU(),
                                    torch.nn.Linear(32, 10, bias=False)), xtr_f, ytr, 60)
    mlp_layers = []
    for lin in (mlp[0], mlp[2]):
        q, s = quantize(lin.weight.detach().numpy().T, WBITS)
        mlp_layers.append({"kind": "fc", "q": q, "scale": s, "shift": 0})
    pick_shifts(mlp_layers, xtr, ytr)

    torch.manual_seed(SEED)
    cnn = train(torch.nn.Sequential(torch.nn.Unflatten(1, (1, 8, 8)),
                                    torch.nn.Conv2d(1, 8, 3, padding=1, bias=False), torch.nn.ReLU(),
                                    torch.nn.Flatten(start_dim=1),
                                    torch.nn.Linear(512, 10, bias=False)), xtr_f, ytr, 40)
    conv_w = cnn[1].weight.detach().numpy().transpose(2, 3, 1, 0)  # (KH, KW, C, OC)
    qc, sc = quantize(conv_w, WBITS)
    # torch flattens (C, H, W); the integer engine is HWC.
    fc_w = cnn[4].weight.detach().numpy().reshape(10, 8, 8, 8).transpose(2, 3, 1, 0).reshape(512, 10)
    qf, sf = quantize(fc_w, WBITS)
    cnn_layers = [{"kind": "conv", "q": qc, "scale": sc, "shift": 0, "in_dims": (8, 8, 1),
                   "stride": 1, "padding": 1},
                  {"kind": "fc", "q": qf, "scale": sf, "shift": 0}]
    pick_shifts(cnn_layers, xtr, ytr)

    model_doc("mlp", mlp_layers, [64])
    model_doc("cnn", cnn_layers, [8, 8, 1])
    dump(DATA / "digits_test.json", {"format": "xbarsec.dataset", "input_shape": [64], "bits": ABITS,
                                     "num_classes": 10, "inputs": xte.tolist(), "labels": yte.tolist()})

    golden = {}
    for name, layers in (("mlp", mlp_layers), ("cnn", cnn_layers)):
        scores = [forward(layers, xi).tolist() for xi in xte[:GOLDEN]]
        acc = float(np.mean([np.argmax(forward(layers, xi)) == yi for xi, yi in zip(xte, yte)]))
        golden[name] = {"scores": scores, "accuracy": acc}
        print(f"{name}: integer test accuracy {acc:.4f}, shifts {[l['shift'] for l in layers]}")
    dump(FIX / "golden_scores.json", golden)

    # Float -> int quantization cases, rounding half away from zero.
    rng = np.random.default_rng(SEED)
    cases = [{"values": [127.0, 63.5, -63.5, 0.5, -0.5, 1.5, -127.0], "bits": 8, "signed": True},
             {"values": [255.0, 2.5, 0.5, 0.0], "bits": 8, "signed": False},
             {"values": [0.0, 0.0], "bits": 4, "signed": True}]
    for bits in (2, 4, 8, 12, 16):
        for signed in (True, False):
            v = rng.normal(size=40)
            if not signed:
                v = np.abs(v)
            cases.append({"values": v.tolist(), "bits": bits, "signed": signed})
    for c in cases:
        v = np.array(c["values"])
        qmax = 2 ** (c["bits"] - 1) - 1 if c["signed"] else 2 ** c["bits"] - 1
        qmin = -qmax - 1 if c["signed"] else 0
        m = float(np.max(np.abs(v)))
        scale = m / qmax if m > 0 else 1.0
        c["scale"] = scale
        c["expected"] = np.clip(round_half_away(v / scale), qmin, qmax).astype(int).tolist()
    dump(FIX / "quantize_cases.json", {"cases": cases})


if __name__ == "__main__":
    main()
