#!/usr/bin/env python3
"""Produces the int8 reference model and test subset shipped in data/mnist/.

Trains an MLP (784-256-256-256-10, ReLU) on the official MNIST training
set, quantizes it to symmetric int8 with power-free scales calibrated on
training data, and writes:

  model.json                  layer manifest with dims, scales, file names
  fc{1..4}-weights.bin        row-major int8, out_dim x in_dim
  fc{1..4}-bias.bin           little-endian int32 at the accumulator scale
  t2048-images-idx3-ubyte     first 2048 official test images (IDX format)
  t2048-labels-idx1-ubyte     matching labels

The script then re-runs the exported model through a pure-integer forward
pass (the same arithmetic the simulator uses: round-to-nearest-even
requantization, [0,127] ReLU clamp, 24-bit accumulators) and refuses to
export if accuracy or accumulator headroom is inadequate.

MNIST source: any directory holding the four official IDX files, e.g.
  npm install mnist-data   ->  node_modules/mnist-data/data/
"""

import argparse
import json
import struct
import sys
from pathlib import Path

import numpy as np
import torch
from torch import nn

TOPOLOGY = [784, 256, 256, 256, 10]
SEED = 2026
EPOCHS = 16
BATCH = 128
LR = 1.5e-3
INPUT_SCALE = 1.0 / 127.0
ACC_LIMIT = 1 << 23  # 24-bit two's-complement accumulator
SUBSET = 2048


def load_idx(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    zero, dtype, ndims = struct.unpack(">HBB", raw[:4])
    if zero != 0 or dtype != 0x08:
        raise ValueError(f"{path}: not an unsigned-byte IDX file")
    dims = struct.unpack(f">{ndims}I", raw[4 : 4 + 4 * ndims])
    data = np.frombuffer(raw, dtype=np.uint8, offset=4 + 4 * ndims)
    return data.reshape(dims)


def save_idx(path: Path, array: np.ndarray) -> None:
    header = struct.pack(">HBB", 0, 0x08, array.ndim)
    header += struct.pack(f">{array.ndim}I", *array.shape)
    path.write_bytes(header + array.astype(np.uint8).tobytes())


def train_float(train_x: np.ndarray, train_y: np.ndarray) -> nn.Sequential:
    torch.manual_seed(SEED)
    stages = []
    for i in range(len(TOPOLOGY) - 1):
        stages.append(nn.Linear(TOPOLOGY[i], TOPOLOGY[i + 1]))
        if i < len(TOPOLOGY) - 2:
            stages.append(nn.ReLU())
    model = nn.Sequential(*stages)
    x = torch.from_numpy(train_x)
    y = torch.from_numpy(train_y.astype(np.int64))
    opt = torch.optim.Adam(model.parameters(), lr=LR)
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, T_max=EPOCHS)
    loss_fn = nn.CrossEntropyLoss()
    gen = torch.Generator().manual_seed(SEED)
    for epoch in range(EPOCHS):
        order = torch.randperm(len(x), generator=gen)
        total = 0.0
        for i in range(0, len(x), BATCH):
            idx = order[i : i + BATCH]
            opt.zero_grad()
            loss = loss_fn(model(x[idx]), y[idx])
            loss.backward()
            opt.step()
            total += loss.item() * len(idx)
        sched.step()
        print(f"  epoch {epoch + 1}: train loss {total / len(x):.4f}")
    model.eval()
    return model


def rne(x: np.ndarray) -> np.ndarray:
    return np.rint(x)  # numpy rounds half to even


def quantize_model(model: nn.Sequential, calib: np.ndarray):
    """Max-abs weight scales; activation scales calibrated by running the
    quantized pipeline itself over `calib` (quantized uint8-scale pixels)."""
    linears = [m for m in model if isinstance(m, nn.Linear)]
    layers = []
    acts = calib  # int8 values in [0,127], scale INPUT_SCALE
    in_scale = INPUT_SCALE
    for li, lin in enumerate(linears):
        w = lin.weight.detach().numpy()
        b = lin.bias.detach().numpy()
        w_scale = float(np.abs(w).max()) / 127.0
        w_q = np.clip(rne(w / w_scale), -127, 127).astype(np.int64)
        acc_scale = w_scale * in_scale
        b_q = rne(b / acc_scale).astype(np.int64)
        if np.abs(b_q).max() >= ACC_LIMIT:
            raise RuntimeError(f"layer {li}: bias exceeds 24-bit range")
        acc = acts.astype(np.int64) @ w_q.T + b_q  # batch x out
        last = li == len(linears) - 1
        if last:
            out_scale = 1.0
        else:
            relu = np.maximum(acc, 0) * acc_scale
            out_scale = float(np.quantile(relu, 0.9995)) / 127.0
            acts = np.clip(rne(np.maximum(acc, 0) * (acc_scale / out_scale)),
                           0, 127).astype(np.int64)
        layers.append({
            "w_q": w_q.astype(np.int8),
            "b_q": b_q.astype(np.int32),
            "w_scale": w_scale,
            "in_scale": in_scale,
            "out_scale": out_scale,
            "relu": not last,
        })
        in_scale = out_scale
    return layers


def int8_forward(layers, images_u8: np.ndarray) -> tuple[np.ndarray, int]:
    """Integer forward pass mirroring the simulator: 24-bit wraparound
    accumulators, RNE requantization, [0,127] ReLU clamp. Returns argmax
    predictions and the largest |accumulator| seen (headroom check)."""
    x = images_u8.reshape(len(images_u8), -1).astype(np.float64) / 255.0
    acts = np.clip(rne(x / INPUT_SCALE), 0, 127).astype(np.int64)
    peak = 0
    acc = None
    for layer in layers:
        acc = acts @ layer["w_q"].astype(np.int64).T + layer["b_q"]
        peak = max(peak, int(np.abs(acc).max()))
        acc = (acc + ACC_LIMIT) % (1 << 24) - ACC_LIMIT  # wrap like hardware
        if layer["relu"]:
            scale = layer["w_scale"] * layer["in_scale"] / layer["out_scale"]
            acts = np.clip(rne(np.maximum(acc, 0) * scale), 0, 127).astype(np.int64)
    return acc.argmax(axis=1), peak


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--mnist-dir", type=Path,
                    default=Path("/tmp/mnistpkg/node_modules/mnist-data/data"))
    ap.add_argument("--out-dir", type=Path,
                    default=Path(__file__).resolve().parent.parent / "data/mnist")
    args = ap.parse_args()

    train_images = load_idx(args.mnist_dir / "train-images-idx3-ubyte")
    train_labels = load_idx(args.mnist_dir / "train-labels-idx1-ubyte")
    test_images = load_idx(args.mnist_dir / "t10k-images-idx3-ubyte")
    test_labels = load_idx(args.mnist_dir / "t10k-labels-idx1-ubyte")

    train_x = train_images.reshape(len(train_images), -1).astype(np.float32) / 255.0
    print(f"training on {len(train_x)} images, topology {TOPOLOGY}")
    model = train_float(train_x, train_labels)

    with torch.no_grad():
        logits = model(torch.from_numpy(
            test_images.reshape(len(test_images), -1).astype(np.float32) / 255.0))
    float_acc = float((logits.argmax(1).numpy() == test_labels).mean())
    print(f"float test accuracy: {float_acc:.4f}")

    calib_f = train_x[:4096]
    calib_q = np.clip(rne(calib_f / INPUT_SCALE), 0, 127).astype(np.int64)
    layers = quantize_model(model, calib_q)

    subset_images = test_images[:SUBSET]
    subset_labels = test_labels[:SUBSET]
    pred, peak = int8_forward(layers, subset_images)
    int8_acc = float((pred == subset_labels).mean())
    headroom = ACC_LIMIT / peak
    print(f"int8 accuracy on the {SUBSET}-image subset: {int8_acc:.4f}")
    print(f"peak |accumulator| {peak} ({headroom:.1f}x below the 24-bit limit)")

    if int8_acc < 0.975:
        print("refusing to export: int8 accuracy below 0.975", file=sys.stderr)
        return 1
    if headroom < 2.0:
        print("refusing to export: accumulators too close to wraparound",
              file=sys.stderr)
        return 1

    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    topo = "-".join(str(d) for d in TOPOLOGY)
    manifest = {"name": f"mnist-mlp-{topo}", "layers": []}
    for li, layer in enumerate(layers, start=1):
        wfile, bfile = f"fc{li}-weights.bin", f"fc{li}-bias.bin"
        (out / wfile).write_bytes(layer["w_q"].tobytes())
        (out / bfile).write_bytes(layer["b_q"].astype("<i4").tobytes())
        manifest["layers"].append({
            "name": f"fc{li}",
            "in_dim": int(layer["w_q"].shape[1]),
            "out_dim": int(layer["w_q"].shape[0]),
            "weights": wfile,
            "bias": bfile,
            "weight_scale": layer["w_scale"],
            "input_scale": layer["in_scale"],
            "output_scale": layer["out_scale"],
            "activation": "relu" if layer["relu"] else "none",
        })
    (out / "model.json").write_text(json.dumps(manifest, indent=2) + "\n")
    save_idx(out / "t2048-images-idx3-ubyte", subset_images)
    save_idx(out / "t2048-labels-idx1-ubyte", subset_labels)
    print(f"exported model and {SUBSET}-image subset to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
