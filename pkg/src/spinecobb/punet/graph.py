"""Layer graph of the Progressive U-Net.

Encoder stages run conv3x3 -> instance norm -> ReLU twice, then dropout and
2x2 max pooling; the pre-pool features feed the matching decoder stage
through a skip connection. Decoder stages upsample x2 (nearest), concatenate
the skip, and repeat the conv/norm/ReLU pair with dropout. The first three
decoder stages each emit a 1x1-conv side output; every side output is
upsampled and added to the next, and the last one is added to a 1-channel
projection of the final decoder features ahead of the final 1x1 conv and
sigmoid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import ShapeError

SIDE_OUTPUTS = 3


@dataclass(frozen=True)
class TensorShape:
    channels: int
    height: int
    width: int

    def __post_init__(self):
        if min(self.channels, self.height, self.width) <= 0:
            raise ShapeError(f"tensor dimensions must be positive, got {self.as_tuple()}")

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.channels, self.height, self.width)

    def __str__(self):
        return f"{self.channels}x{self.height}x{self.width}"


@dataclass(frozen=True)
class LayerSpec:
    name: str
    kind: str  # input, conv, instance_norm, relu, dropout, maxpool, upsample, concat, add, sigmoid
    inputs: tuple[str, ...]
    output: TensorShape
    params: tuple[tuple[str, tuple[int, ...]], ...] = ()
    attrs: tuple[tuple[str, float], ...] = ()

    def attr(self, key, default=None):
        return dict(self.attrs).get(key, default)

    @property
    def parameter_count(self) -> int:
        total = 0
        for _, shape in self.params:
            n = 1
            for s in shape:
                n *= s
            total += n
        return total


@dataclass(frozen=True)
class NetSpec:
    input_shape: TensorShape
    depth: int
    base_channels: int
    dropout_rate: float
    layers: tuple[LayerSpec, ...]
    progressive: bool = True
    side_names: tuple[str, ...] = field(default=())
    output_name: str = "head.sigmoid"

    def layer(self, name: str) -> LayerSpec:
        for layer in self.layers:
            if layer.name == name:
                return layer
        raise KeyError(name)

    @property
    def parameter_count(self) -> int:
        return sum(layer.parameter_count for layer in self.layers)

    def parameter_shapes(self) -> list[tuple[str, tuple[int, ...]]]:
        return [(f"{layer.name}.{p}", shape) for layer in self.layers for p, shape in layer.params]

    @property
    def side_output_shapes(self) -> list[TensorShape]:
        return [self.layer(n).output for n in self.side_names]

    @property
    def output_shape(self) -> TensorShape:
        return self.layer(self.output_name).output

    def plain(self) -> "NetSpec":
        """The same network without side branches."""
        return build_spec(self.input_shape, self.depth, self.base_channels, self.dropout_rate, progressive=False)


class _Builder:
    def __init__(self):
        self.layers: list[LayerSpec] = []
        self.shapes: dict[str, TensorShape] = {}

    def add(self, name, kind, inputs, output, params=(), attrs=()):
        self.layers.append(LayerSpec(name, kind, tuple(inputs), output, tuple(params), tuple(attrs)))
        self.shapes[name] = output
        return name

    def conv(self, name, src, out_ch, k):
        s = self.shapes[src]
        return self.add(
            name, "conv", [src], TensorShape(out_ch, s.height, s.width),
            params=[("weight", (out_ch, s.channels, k, k)), ("bias", (out_ch,))],
            attrs=[("kernel", k)],
        )

    def conv_block(self, prefix, src, out_ch):
        x = src
        for i in (1, 2):
            x = self.conv(f"{prefix}.conv{i}", x, out_ch, 3)
            s = self.shapes[x]
            x = self.add(f"{prefix}.norm{i}", "instance_norm", [x], s,
                         params=[("gamma", (out_ch,)), ("beta", (out_ch,))])
            x = self.add(f"{prefix}.relu{i}", "relu", [x], s)
        return x

    def upsample(self, name, src, factor):
        s = self.shapes[src]
        return self.add(name, "upsample", [src], TensorShape(s.channels, s.height * factor, s.width * factor),
                        attrs=[("factor", factor)])


def build_spec(
    input_shape: TensorShape,
    depth: int = 4,
    base_channels: int = 16,
    dropout_rate: float = 0.25,
    progressive: bool = True,
) -> NetSpec:
    if depth < SIDE_OUTPUTS:
        raise ShapeError(f"depth must be >= {SIDE_OUTPUTS} to host {SIDE_OUTPUTS} side outputs, got {depth}")
    if base_channels < 1:
        raise ShapeError("base_channels must be >= 1")
    if not 0.0 <= dropout_rate < 1.0:
        raise ShapeError(f"dropout_rate must be in [0, 1), got {dropout_rate}")
    div = 2 ** depth
    bad = [f"{label} {v}" for label, v in (("height", input_shape.height), ("width", input_shape.width)) if v % div]
    if bad:
        raise ShapeError(
            f"{' and '.join(bad)} not divisible by {div}; depth {depth} requires height and width "
            f"to be multiples of 2**{depth} = {div}"
        )

    b = _Builder()
    x = b.add("input", "input", [], input_shape)
    skips = []
    for i in range(depth):
        ch = base_channels * 2 ** i
        x = b.conv_block(f"enc{i}", x, ch)
        x = b.add(f"enc{i}.dropout", "dropout", [x], b.shapes[x], attrs=[("rate", dropout_rate)])
        skips.append(x)
        s = b.shapes[x]
        x = b.add(f"enc{i}.pool", "maxpool", [x], TensorShape(s.channels, s.height // 2, s.width // 2))

    x = b.conv_block("bottleneck", x, base_channels * 2 ** depth)
    x = b.add("bottleneck.dropout", "dropout", [x], b.shapes[x], attrs=[("rate", dropout_rate)])

    side_names = []
    cumulative = None
    for j in range(1, depth + 1):
        skip = skips[depth - j]
        ch = base_channels * 2 ** (depth - j)
        up = b.upsample(f"dec{j}.up", x, 2)
        cat_ch = b.shapes[up].channels + b.shapes[skip].channels
        s = b.shapes[skip]
        cat = b.add(f"dec{j}.concat", "concat", [up, skip], TensorShape(cat_ch, s.height, s.width))
        x = b.conv_block(f"dec{j}", cat, ch)
        x = b.add(f"dec{j}.dropout", "dropout", [x], b.shapes[x], attrs=[("rate", dropout_rate)])

        if progressive and j <= SIDE_OUTPUTS:
            side = b.conv(f"side{j}.conv", x, 1, 1)
            if cumulative is not None:
                prev_up = b.upsample(f"side{j - 1}.up", cumulative, 2)
                side = b.add(f"side{j}.add", "add", [side, prev_up], b.shapes[side])
            cumulative = side
            side_names.append(b.add(f"side{j}.sigmoid", "sigmoid", [side], b.shapes[side]))

    head = b.conv("head.proj", x, 1, 1)
    if progressive:
        factor = input_shape.height // b.shapes[cumulative].height
        fused = b.upsample(f"side{SIDE_OUTPUTS}.up", cumulative, factor)
        head = b.add("head.add", "add", [head, fused], b.shapes[head])
    head = b.conv("head.conv", head, 1, 1)
    b.add("head.sigmoid", "sigmoid", [head], b.shapes[head])

    return NetSpec(
        input_shape=input_shape,
        depth=depth,
        base_channels=base_channels,
        dropout_rate=dropout_rate,
        layers=tuple(b.layers),
        progressive=progressive,
        side_names=tuple(side_names),
    )


def closed_form_parameter_count(depth: int, base_channels: int, in_channels: int = 1, progressive: bool = True) -> int:
    """Parameter count as a closed-form expression in depth and width.

    With ``b = base_channels`` and ``d = depth``::

        first encoder stage       9b(in + b) + 6b
        encoders 1..d-1, bottleneck   sum 13.5 b^2 4^i + 6 b 2^i,  i = 1..d
        decoders                  sum 36 b^2 4^i + 6 b 2^i,       i = 0..d-1
        side convs                7 b 2^(d-3) + 3
        head                      (b + 1) + 2

    which sums to ``9b(in+b) + 30 b^2 (4^d - 1) + 6b(3*2^d - 2) + 7b*2^(d-3) + b + 6``.
    """
    b, d = base_channels, depth
    total = 9 * b * (in_channels + b) + 30 * b * b * (4 ** d - 1) + 6 * b * (3 * 2 ** d - 2) + b + 3
    if progressive:
        # 7b * 2^(d-3) stays integral because d >= 3.
        total += 7 * b * 2 ** (d - 3) + 3
    return total
