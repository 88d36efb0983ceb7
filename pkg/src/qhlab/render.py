"""Hand-rolled SVG renderings: Whitney cubes as level-colored rectangles,
obstacle boxes and walls as dark geometry, an optional shadow highlight."""

from __future__ import annotations

WIDTH = 800.0


def _color(j: int, j_max: int) -> str:
    # coarse cubes cold, fine cubes warm
    t = 0.0 if j_max <= 0 else min(max(j / j_max, 0.0), 1.0)
    hue = 220.0 * (1.0 - t)
    return "hsl(%.0f,70%%,62%%)" % hue


def render_svg(
    oracle,
    W=None,
    shadow_ids=None,
    shadow_root: int | None = None,
    comment: str | None = None,
) -> str:
    bb = oracle.bbox
    w = bb.hi[0] - bb.lo[0]
    h = bb.hi[1] - bb.lo[1]
    scale = WIDTH / w
    height = h * scale

    def sx(x: float) -> float:
        return (x - bb.lo[0]) * scale

    def sy(y: float) -> float:
        # svg y axis points down
        return (bb.hi[1] - y) * scale

    lines = []
    if comment is not None:
        lines.append("<!-- %s -->" % comment)
    lines.append(
        '<svg xmlns="http://www.w3.org/2000/svg" width="%.0f" height="%.0f" '
        'viewBox="0 0 %.0f %.0f">' % (WIDTH, height, WIDTH, height)
    )
    lines.append('<rect width="100%" height="100%" fill="white"/>')

    if W is not None:
        j_max = int(max(W.abs_levels())) if W.n_cubes else 1
        for i in range(W.n_cubes):
            box = W.cube_box(i)
            j = W.abs_level(i)
            lines.append(
                '<rect x="%.2f" y="%.2f" width="%.2f" height="%.2f" '
                'fill="%s" stroke="#333" stroke-width="0.3"/>'
                % (
                    sx(box.lo[0]),
                    sy(box.hi[1]),
                    (box.hi[0] - box.lo[0]) * scale,
                    (box.hi[1] - box.lo[1]) * scale,
                    _color(j, j_max),
                )
            )
        if shadow_ids is not None:
            for i in sorted(int(k) for k in shadow_ids):
                box = W.cube_box(i)
                lines.append(
                    '<rect x="%.2f" y="%.2f" width="%.2f" height="%.2f" '
                    'fill="crimson" fill-opacity="0.45" stroke="none"/>'
                    % (
                        sx(box.lo[0]),
                        sy(box.hi[1]),
                        (box.hi[0] - box.lo[0]) * scale,
                        (box.hi[1] - box.lo[1]) * scale,
                    )
                )
        if shadow_root is not None:
            box = W.cube_box(int(shadow_root))
            lines.append(
                '<rect x="%.2f" y="%.2f" width="%.2f" height="%.2f" '
                'fill="none" stroke="crimson" stroke-width="2"/>'
                % (
                    sx(box.lo[0]),
                    sy(box.hi[1]),
                    (box.hi[0] - box.lo[0]) * scale,
                    (box.hi[1] - box.lo[1]) * scale,
                )
            )

    box_lo, box_hi, walls = oracle.edge_blockers()
    for lo, hi in zip(box_lo, box_hi):
        lines.append(
            '<rect x="%.2f" y="%.2f" width="%.2f" height="%.2f" fill="#222"/>'
            % (sx(lo[0]), sy(hi[1]), (hi[0] - lo[0]) * scale,
               (hi[1] - lo[1]) * scale)
        )
    for seg in walls:
        lines.append(
            '<line x1="%.2f" y1="%.2f" x2="%.2f" y2="%.2f" '
            'stroke="black" stroke-width="1"/>'
            % (sx(seg.a[0]), sy(seg.a[1]), sx(seg.b[0]), sy(seg.b[1]))
        )
    circle = getattr(oracle, "circle", None)
    if circle is not None:
        (cx, cy), r = circle
        lines.append(
            '<circle cx="%.2f" cy="%.2f" r="%.2f" fill="none" '
            'stroke="black" stroke-width="1.5"/>' % (sx(cx), sy(cy), r * scale)
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def save_svg(path: str, oracle, W=None, shadow_ids=None,
             shadow_root: int | None = None,
             comment: str | None = None) -> None:
    with open(path, "w") as fh:
        fh.write(render_svg(oracle, W, shadow_ids, shadow_root, comment))
