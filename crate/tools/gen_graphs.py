#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Writes the benchmark network graphs shipped in crates/core/data/graphs.

Layer lists follow the published Inception-v1 (GoogLeNet), ResNet-152 and
GNMT architectures. Activations are 4-bit words packed two per byte.
Residual additions are fused into the last convolution of each block.
"""
import json
import math
import os

WORD_BITS = 4
OUT = os.path.join(os.path.dirname(__file__), "..", "crates", "core", "data", "graphs")


def nbytes(shape):
    return math.ceil(shape[0] * shape[1] * shape[2] * WORD_BITS / 8)


class Builder:
    def __init__(self, name):
        self.name = name
        self.nodes = []
        self.edges = []
        self.shape = {}

    def node(self, nid, kind, out_shape=None, **kw):
        n = {"id": nid, "kind": kind}
        n.update(kw)
        if out_shape is not None:
            n["out_shape"] = list(out_shape)
            self.shape[nid] = tuple(out_shape)
        self.nodes.append(n)
        return nid

    def edge(self, src, dst, role=None, nbytes_=None):
        e = {"src": src, "dst": dst, "bytes": nbytes_ if nbytes_ else nbytes(self.shape[src])}
        if role:
            e["role"] = role
        self.edges.append(e)

    def conv(self, nid, src, cout, k, stride=1, act="relu"):
        h, w, c = self.shape[src]
        ho, wo = math.ceil(h / stride), math.ceil(w / stride)
        self.node(nid, "conv", (ho, wo, cout), activation=act, in_shape=[h, w, c],
                  kernel=[k, k], stride=stride)
        self.edge(src, nid)
        return nid

    def pool(self, nid, src, k, stride, kind="maxpool", out_hw=None):
        h, w, c = self.shape[src]
        ho, wo = out_hw if out_hw else (math.ceil(h / stride), math.ceil(w / stride))
        self.node(nid, kind, (ho, wo, c), in_shape=[h, w, c], kernel=[k, k], stride=stride)
        self.edge(src, nid)
        return nid

    def write(self, fname):
        path = os.path.join(OUT, fname)
        with open(path, "w") as f:
            f.write('{\n  "name": %s,\n  "word_bits": %d,\n  "nodes": [\n' % (json.dumps(self.name), WORD_BITS))
            f.write(",\n".join("    " + json.dumps(n) for n in self.nodes))
            f.write('\n  ],\n  "edges": [\n')
            f.write(",\n".join("    " + json.dumps(e) for e in self.edges))
            f.write("\n  ]\n}\n")


def toy_chain():
    b = Builder("toy-chain")
    b.node("in", "input", (1, 1, 64))
    b.node("fc1", "fc", (1, 1, 64), activation="relu", inputs=64, outputs=64)
    b.edge("in", "fc1")
    b.node("fc2", "fc", (1, 1, 32), activation="linear", inputs=64, outputs=32)
    b.edge("fc1", "fc2")
    b.node("out", "output")
    b.edge("fc2", "out")
    b.write("toy_chain.json")


INCEPTION = [
    # name, 1x1, 3x3 reduce, 3x3, 5x5 reduce, 5x5, pool proj
    ("3a", 64, 96, 128, 16, 32, 32),
    ("3b", 128, 128, 192, 32, 96, 64),
    "pool",
    ("4a", 192, 96, 208, 16, 48, 64),
    ("4b", 160, 112, 224, 24, 64, 64),
    ("4c", 128, 128, 256, 24, 64, 64),
    ("4d", 112, 144, 288, 32, 64, 64),
    ("4e", 256, 160, 320, 32, 128, 128),
    "pool",
    ("5a", 256, 160, 320, 32, 128, 128),
    ("5b", 384, 192, 384, 48, 128, 128),
]


def inception_v1():
    b = Builder("inception-v1")
    x = b.node("input", "input", (224, 224, 3))
    x = b.conv("conv1", x, 64, 7, 2)
    x = b.pool("pool1", x, 3, 2)
    x = b.conv("conv2_reduce", x, 64, 1)
    x = b.conv("conv2", x, 192, 3)
    x = b.pool("pool2", x, 3, 2)
    pools = 2
    for blk in INCEPTION:
        if blk == "pool":
            pools += 1
            x = b.pool("pool%d" % pools, x, 3, 2)
            continue
        name, c1, r3, c3, r5, c5, pp = blk
        p = "inc%s_" % name
        h, w, _ = b.shape[x]
        br1 = b.conv(p + "1x1", x, c1, 1)
        br2 = b.conv(p + "3x3", b.conv(p + "3x3_reduce", x, r3, 1), c3, 3)
        br3 = b.conv(p + "5x5", b.conv(p + "5x5_reduce", x, r5, 1), c5, 5)
        br4 = b.conv(p + "pool_proj", b.pool(p + "pool", x, 3, 1), pp, 1)
        out = b.node(p + "concat", "concat", (h, w, c1 + c3 + c5 + pp))
        for br in (br1, br2, br3, br4):
            b.edge(br, out)
        x = out
    x = b.pool("avgpool", x, 7, 1, kind="avgpool", out_hw=(1, 1))
    b.node("fc", "fc", (1, 1, 1000), inputs=1024, outputs=1000)
    b.edge(x, "fc")
    b.node("output", "output")
    b.edge("fc", "output")
    b.write("inception_v1.json")


def resnet152():
    b = Builder("resnet-152")
    x = b.node("input", "input", (224, 224, 3))
    x = b.conv("conv1", x, 64, 7, 2)
    x = b.pool("pool1", x, 3, 2)
    for stage, (blocks, width) in enumerate([(3, 64), (8, 128), (36, 256), (3, 512)], start=2):
        for i in range(blocks):
            p = "res%d_%02d_" % (stage, i + 1)
            stride = 2 if (i == 0 and stage > 2) else 1
            a = b.conv(p + "a", x, width, 1, stride)
            bb = b.conv(p + "b", a, width, 3)
            if i == 0:
                shortcut = b.conv(p + "proj", x, 4 * width, 1, stride, act="linear")
            else:
                shortcut = x
            c = b.conv(p + "c", bb, 4 * width, 1)
            b.edge(shortcut, c, role="residual")
            x = c
    x = b.pool("avgpool", x, 7, 1, kind="avgpool", out_hw=(1, 1))
    b.node("fc", "fc", (1, 1, 1000), inputs=2048, outputs=1000)
    b.edge(x, "fc")
    b.node("output", "output")
    b.edge("fc", "output")
    b.write("resnet152.json")


def gnmt1024(seq=32, hidden=1024, layers=8):
    b = Builder("gnmt-1024")
    seq_shape = (seq, 1, hidden)
    x = b.node("input", "input", seq_shape)
    for side in ("enc", "dec"):
        for i in range(layers):
            nid = "%s%d" % (side, i)
            b.node(nid, "recurrent", seq_shape, activation="tanh", inputs=2 * hidden,
                   outputs=4 * hidden, steps=seq, gates=4)
            b.edge(x, nid)
            x = nid
    b.node("output", "output")
    b.edge(x, "output")
    b.write("gnmt1024.json")


if __name__ == "__main__":
    os.makedirs(OUT, exist_ok=True)
    toy_chain()
    inception_v1()
    resnet152()
    gnmt1024()
