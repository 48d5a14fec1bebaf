import init, { scatter, convergence, landscape } from "./pkg/fisher_mala_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function pairs(flat) {
  const out = [];
  for (let i = 0; i < flat.length; i += 2) out.push([flat[i], flat[i + 1]]);
  return out;
}

// Draws point sets into a rectangle of the canvas, with shared axes per call.
function plot(ctx, box, series, { lines = false, logY = false, mark } = {}) {
  const tf = (p) => [p[0], logY ? Math.log10(Math.max(p[1], 1e-12)) : p[1]];
  const all = series.flatMap((s) => s.points.map(tf));
  const xs = all.map((p) => p[0]), ys = all.map((p) => p[1]);
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  const [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  const sx = (x) => box.x + 30 + ((x - x0) / (x1 - x0 || 1)) * (box.w - 40);
  const sy = (y) => box.y + box.h - 20 - ((y - y0) / (y1 - y0 || 1)) * (box.h - 30);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(box.x + 30, box.y + 10, box.w - 40, box.h - 30);
  ctx.fillStyle = "#333";
  ctx.fillText(logY ? `1e${y1.toFixed(1)}` : y1.toPrecision(3), box.x, box.y + 14);
  ctx.fillText(logY ? `1e${y0.toFixed(1)}` : y0.toPrecision(3), box.x, box.y + box.h - 20);
  ctx.fillText(x0.toPrecision(3), box.x + 30, box.y + box.h - 5);
  ctx.fillText(x1.toPrecision(3), box.x + box.w - 40, box.y + box.h - 5);
  for (const s of series) {
    ctx.strokeStyle = ctx.fillStyle = s.color;
    const pts = s.points.map(tf);
    if (lines) {
      ctx.beginPath();
      pts.forEach((p, i) => (i ? ctx.lineTo(sx(p[0]), sy(p[1])) : ctx.moveTo(sx(p[0]), sy(p[1]))));
      ctx.stroke();
    } else {
      for (const p of pts) ctx.fillRect(sx(p[0]) - 1, sy(p[1]) - 1, 2, 2);
    }
    if (s.label) ctx.fillText(s.label, box.x + 40, box.y + 24);
  }
  if (mark !== undefined) {
    ctx.strokeStyle = "#c00";
    ctx.beginPath();
    ctx.moveTo(sx(mark), box.y + 10);
    ctx.lineTo(sx(mark), box.y + box.h - 20);
    ctx.stroke();
  }
}

function guarded(msgId, f) {
  return () => {
    const msg = $(msgId);
    msg.className = "";
    msg.textContent = "";
    const t = performance.now();
    try {
      f();
      msg.textContent = `${(performance.now() - t).toFixed(0)} ms`;
    } catch (e) {
      msg.className = "err";
      msg.textContent = e.message ?? String(e);
    }
  };
}

function runScatter() {
  const args = [num("s-rho"), num("s-burn"), num("s-draws"), BigInt(num("s-seed"))];
  const canvas = $("s-plot");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const w = canvas.width / 2;
  [["fisher-mala", "#1f6fb4"], ["mala", "#d2691e"]].forEach(([name, color], i) => {
    const points = pairs(scatter(name, ...args));
    plot(ctx, { x: i * w, y: 0, w, h: canvas.height }, [{ points, color, label: name }]);
  });
}

function runConvergence() {
  const steps = num("c-steps");
  const curve = pairs(convergence(num("c-rho"), steps, Math.max(1, Math.floor(steps / 200)), BigInt(num("c-seed"))));
  const canvas = $("c-plot");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  plot(ctx, { x: 0, y: 0, w: canvas.width, h: canvas.height },
    [{ points: curve, color: "#1f6fb4", label: "normalized Frobenius distance (log scale)" }],
    { lines: true, logY: true });
}

function runLandscape() {
  const i1 = num("l-i1");
  const points = pairs(landscape(i1, num("l-i2"), num("l-delta"), 400));
  const canvas = $("l-plot");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  // the red line marks A = I⁻¹
  plot(ctx, { x: 0, y: 0, w: canvas.width, h: canvas.height },
    [{ points, color: "#2a8a2a", label: "J(diag(a₁, c − a₁)) against a₁" }],
    { lines: true, mark: 1 / i1 });
}

await init();
$("s-run").onclick = guarded("s-msg", runScatter);
$("c-run").onclick = guarded("c-msg", runConvergence);
$("l-run").onclick = guarded("l-msg", runLandscape);
$("s-run").click();
$("c-run").click();
$("l-run").click();
