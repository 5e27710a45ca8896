import init, { flowGraph, expansionCurve, streamDelays } from "./pkg/cyclecast_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function report(id, text, isError = false) {
  const el = $(id);
  el.textContent = text;
  el.classList.toggle("err", isError);
}

function guarded(outId, fn) {
  return () => {
    try {
      fn();
    } catch (e) {
      report(outId, String(e), true);
    }
  };
}

function arrow(ctx, x1, y1, x2, y2, color) {
  const a = Math.atan2(y2 - y1, x2 - x1);
  ctx.strokeStyle = ctx.fillStyle = color;
  ctx.beginPath();
  ctx.moveTo(x1, y1);
  ctx.lineTo(x2, y2);
  ctx.stroke();
  ctx.beginPath();
  ctx.moveTo(x2, y2);
  ctx.lineTo(x2 - 7 * Math.cos(a - 0.4), y2 - 7 * Math.sin(a - 0.4));
  ctx.lineTo(x2 - 7 * Math.cos(a + 0.4), y2 - 7 * Math.sin(a + 0.4));
  ctx.fill();
}

function drawFlowGraph() {
  const g = JSON.parse(flowGraph(num("fg-n"), num("fg-q"), num("fg-seed")));
  const c = $("fg-canvas");
  const ctx = c.getContext("2d");
  ctx.clearRect(0, 0, c.width, c.height);
  const cx = c.width / 2, cy = c.height / 2, r = c.width / 2 - 24;
  const pos = new Map();
  g.order.forEach((peer, i) => {
    const a = (2 * Math.PI * i) / g.n - Math.PI / 2;
    pos.set(peer, [cx + r * Math.cos(a), cy + r * Math.sin(a)]);
  });
  const shorten = ([x1, y1], [x2, y2]) => {
    const d = Math.hypot(x2 - x1, y2 - y1) || 1;
    const k = Math.min(6 / d, 0.5);
    return [x1 + (x2 - x1) * k, y1 + (y2 - y1) * k, x2 - (x2 - x1) * k, y2 - (y2 - y1) * k];
  };
  ctx.lineWidth = 1;
  for (const [a, b] of g.e1) arrow(ctx, ...shorten(pos.get(a), pos.get(b)), "#bbb");
  ctx.lineWidth = 1.5;
  for (const [a, b] of g.e2) arrow(ctx, ...shorten(pos.get(a), pos.get(b)), "#d2691e");
  for (const [peer, [x, y]] of pos) {
    const d = g.distance[peer - 1];
    const shade = Math.round(40 + 180 * (d / Math.max(1, g.depth)));
    ctx.fillStyle = peer === 1 ? "#c00" : `rgb(${shade},${shade},255)`;
    ctx.beginPath();
    ctx.arc(x, y, peer === 1 ? 6 : 4, 0, 2 * Math.PI);
    ctx.fill();
  }
  const half = Math.floor(g.n / 2);
  report(
    "fg-out",
    `|E1| = ${g.e1.length}, |E2| = ${g.e2.length}\n` +
      `depth from source ${g.depth}, depth to source ${g.reverse_depth}, diameter ${g.diameter ?? "unreachable"}\n` +
      `z(N/2) = ${g.z[half]} of ${g.n}`,
  );
}

function axes(ctx, box, xmax, ymin, ymax, xlabel, ylabel) {
  const { l, t, w, h } = box;
  ctx.strokeStyle = "#444";
  ctx.fillStyle = "#444";
  ctx.lineWidth = 1;
  ctx.strokeRect(l, t, w, h);
  ctx.font = "12px system-ui";
  ctx.fillText(xlabel, l + w / 2 - 10, t + h + 28);
  ctx.save();
  ctx.translate(l - 36, t + h / 2);
  ctx.rotate(-Math.PI / 2);
  ctx.fillText(ylabel, -20, 0);
  ctx.restore();
  for (let i = 0; i <= 4; i++) {
    const y = ymin + ((ymax - ymin) * i) / 4;
    ctx.fillText(y.toFixed(2), l - 34, t + h - (h * i) / 4 + 4);
    ctx.fillText(Math.round((xmax * i) / 4), l + (w * i) / 4 - 8, t + h + 14);
  }
}

function drawExpansion() {
  const v = JSON.parse(expansionCurve(num("ex-n"), num("ex-q"), num("ex-trials"), num("ex-seed")));
  const c = $("ex-canvas");
  const ctx = c.getContext("2d");
  ctx.clearRect(0, 0, c.width, c.height);
  const box = { l: 60, t: 12, w: c.width - 80, h: c.height - 56 };
  const all = v.mean.concat(v.formula, [v.floor]);
  const ymin = Math.min(...all) - 0.05, ymax = Math.min(Math.max(...all), 3) + 0.05;
  const X = (t) => box.l + (box.w * t) / v.n;
  const Y = (y) => box.t + box.h - (box.h * (Math.min(y, ymax) - ymin)) / (ymax - ymin);
  axes(ctx, box, v.n, ymin, ymax, "t", "z(t)/t");
  ctx.lineWidth = 2;
  ctx.strokeStyle = "#888";
  ctx.beginPath();
  v.t.forEach((t, i) => (i ? ctx.lineTo(X(t), Y(v.formula[i])) : ctx.moveTo(X(t), Y(v.formula[i]))));
  ctx.stroke();
  ctx.fillStyle = "#1565c0";
  v.t.forEach((t, i) => ctx.fillRect(X(t) - 2, Y(v.mean[i]) - 2, 4, 4));
  ctx.setLineDash([6, 4]);
  ctx.strokeStyle = "#2e7d32";
  ctx.beginPath();
  ctx.moveTo(X(0), Y(v.floor));
  ctx.lineTo(X(v.n / 2), Y(v.floor));
  ctx.stroke();
  ctx.setLineDash([]);
  const worst = Math.max(...v.mean.map((m, i) => Math.abs(m - v.formula[i])));
  report("ex-out", `blue: simulated mean over ${v.trials} trials, grey: closed form. Largest gap ${worst.toFixed(4)}.`);
}

function drawStream() {
  const v = JSON.parse(streamDelays(num("st-n"), num("st-m"), num("st-k"), $("st-phase").value, num("st-seed")));
  const c = $("st-canvas");
  const ctx = c.getContext("2d");
  ctx.clearRect(0, 0, c.width, c.height);
  const pts = [];
  for (const p of v.peers) p.bound.forEach((b, i) => p.worst[i] != null && pts.push([b, p.worst[i], i]));
  const max = Math.max(1, ...pts.map(([b]) => b));
  const box = { l: 60, t: 12, w: c.width - 80, h: c.height - 56 };
  const X = (b) => box.l + (box.w * b) / max;
  const Y = (w) => box.t + box.h - (box.h * w) / max;
  axes(ctx, box, max, 0, max, "bound K·d", "worst delay");
  ctx.strokeStyle = "#bbb";
  ctx.beginPath();
  ctx.moveTo(X(0), Y(0));
  ctx.lineTo(X(max), Y(max));
  ctx.stroke();
  const palette = ["#1565c0", "#d2691e", "#2e7d32", "#6a1b9a", "#c62828", "#00838f"];
  for (const [b, w, i] of pts) {
    ctx.fillStyle = palette[i % palette.length];
    ctx.fillRect(X(b) - 2, Y(w) - 2, 4, 4);
  }
  const over = pts.filter(([b, w]) => w > b).length;
  report(
    "st-out",
    `schedule (${v.schedule.join(",")}), phase ${v.phase}, ${v.horizon} slots\n` +
      `freshness violations ${v.freshness_violations}, delay violations ${v.delay_violations}, dots above the diagonal ${over}`,
  );
}

await init();
$("fg-run").onclick = guarded("fg-out", drawFlowGraph);
$("ex-run").onclick = guarded("ex-out", drawExpansion);
$("st-run").onclick = guarded("st-out", drawStream);
guarded("fg-out", drawFlowGraph)();
guarded("ex-out", drawExpansion)();
guarded("st-out", drawStream)();
