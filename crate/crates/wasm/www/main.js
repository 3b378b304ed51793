import init, { boundary, classify, ellipse } from "./pkg/omaxkit_wasm.js";

const canvas = document.getElementById("plot");
const ctx = canvas.getContext("2d");
const out = document.getElementById("out");
const $ = (id) => document.getElementById(id);

function frame(ranges) {
  const pts = ranges.flatMap((r) => r.points);
  let [x0, x1, y0, y1] = [Infinity, -Infinity, Infinity, -Infinity];
  for (const [x, y] of pts) {
    x0 = Math.min(x0, x); x1 = Math.max(x1, x);
    y0 = Math.min(y0, y); y1 = Math.max(y1, y);
  }
  const span = Math.max(x1 - x0, y1 - y0, 1e-6) * 1.15;
  const cx = (x0 + x1) / 2, cy = (y0 + y1) / 2;
  const s = canvas.width / span;
  return ([x, y]) => [canvas.width / 2 + (x - cx) * s, canvas.height / 2 - (y - cy) * s];
}

function polygon(map, points, style, fill) {
  if (points.length === 1) {
    const [x, y] = map(points[0]);
    ctx.fillStyle = style;
    ctx.beginPath(); ctx.arc(x, y, 4, 0, 2 * Math.PI); ctx.fill();
    return;
  }
  ctx.beginPath();
  points.forEach((p, i) => { const [x, y] = map(p); i ? ctx.lineTo(x, y) : ctx.moveTo(x, y); });
  ctx.closePath();
  if (fill) { ctx.fillStyle = fill; ctx.fill(); }
  ctx.strokeStyle = style; ctx.lineWidth = 1.5; ctx.stroke();
}

function draw(main, extra) {
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const map = frame(extra ? [main, extra] : [main]);
  polygon(map, main.points, "#000", "rgba(0,0,0,0.05)");
  ctx.strokeStyle = "crimson"; ctx.lineWidth = 3;
  for (const [a, b, c, d] of main.flats) {
    const [x1, y1] = map([a, b]), [x2, y2] = map([c, d]);
    ctx.beginPath(); ctx.moveTo(x1, y1); ctx.lineTo(x2, y2); ctx.stroke();
  }
  if (extra) polygon(map, extra.points, "#1f77b4", "rgba(31,119,180,0.15)");
}

function show(text) {
  const v = JSON.parse(text);
  if (v.error) { out.textContent = "error: " + v.error; return null; }
  return v;
}

function drawRange() {
  const v = show(boundary($("matrix").value, Number($("samples").value)));
  if (!v) return;
  draw(v);
  out.textContent = `${v.points.length} boundary points, ${v.flats.length} flat portions`;
}

function runClassify() {
  const v = show(classify($("blocks").value));
  if (!v) return;
  draw(v.range, v.counterexample && v.counterexample.range);
  const lines = [`status: ${v.status}`, `rule: ${v.rule ?? "none"}`, ...v.notes];
  if (v.counterexample) {
    const e = v.counterexample.ellipse;
    lines.push(`B: centre ${e.center[0].toFixed(4)}${e.center[1] >= 0 ? "+" : ""}${e.center[1].toFixed(4)}i, axes ${e.p.toFixed(4)} / ${e.q.toFixed(4)}`);
    lines.push(`inclusion margin ${v.counterexample.margin.toExponential(2)}`);
  }
  out.textContent = lines.join("\n");
}

function runEllipse() {
  const n = (id) => Number($(id).value);
  const v = show(ellipse(n("cx"), n("cy"), n("p"), n("q"), n("phi")));
  if (!v) return;
  draw(v.range);
  const m = v.matrix, fmt = (i) => `${m.re[i].map((x, j) => `${x.toFixed(3)}${m.im[i][j] >= 0 ? "+" : ""}${m.im[i][j].toFixed(3)}i`).join("  ")}`;
  out.textContent = `matrix:\n  ${fmt(0)}\n  ${fmt(1)}\nread back: p=${v.roundtrip.p.toFixed(6)} q=${v.roundtrip.q.toFixed(6)} phi=${v.roundtrip.phi.toFixed(6)}`;
}

await init();
$("draw").addEventListener("click", drawRange);
$("classify").addEventListener("click", runClassify);
for (const id of ["cx", "cy", "p", "q", "phi"]) $(id).addEventListener("input", runEllipse);
drawRange();
