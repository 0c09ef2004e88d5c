import init, { envelope_curve, shock_curve, field_slice } from "./pkg/shockfit_web.js";

const $ = (id) => document.getElementById(id);

function params() {
  return {
    family: $("family").value,
    order: Number($("order").value),
    correction: Number($("correction").value),
    tau: Number($("tau").value),
  };
}

function frame(ctx, xs, ys) {
  const finite = (v) => Number.isFinite(v);
  const xf = xs.filter(finite), yf = ys.filter(finite);
  let [x0, x1] = [Math.min(...xf), Math.max(...xf)];
  let [y0, y1] = [Math.min(...yf), Math.max(...yf)];
  if (x1 === x0) { x0 -= 1e-3; x1 += 1e-3; }
  if (y1 === y0) { y0 -= 1e-3; y1 += 1e-3; }
  const { width: w, height: h } = ctx.canvas;
  const pad = 40;
  return {
    x: (v) => pad + (v - x0) / (x1 - x0) * (w - 2 * pad),
    y: (v) => h - pad - (v - y0) / (y1 - y0) * (h - 2 * pad),
    bounds: [x0, x1, y0, y1],
  };
}

function axes(ctx, f, xlabel, ylabel) {
  const [x0, x1, y0, y1] = f.bounds;
  ctx.strokeStyle = "#999";
  ctx.strokeRect(f.x(x0), f.y(y1), f.x(x1) - f.x(x0), f.y(y0) - f.y(y1));
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  ctx.fillText(x0.toPrecision(3), f.x(x0), f.y(y0) + 14);
  ctx.fillText(x1.toPrecision(3), f.x(x1) - 30, f.y(y0) + 14);
  ctx.fillText(y0.toPrecision(3), 2, f.y(y0));
  ctx.fillText(y1.toPrecision(3), 2, f.y(y1) + 10);
  ctx.fillText(xlabel, (f.x(x0) + f.x(x1)) / 2, f.y(y0) + 28);
  ctx.fillText(ylabel, 2, f.y(y1) - 8);
}

// null entries break the polyline
function line(ctx, f, xs, ys, color, dash = []) {
  ctx.strokeStyle = color;
  ctx.setLineDash(dash);
  ctx.beginPath();
  let pen = false;
  for (let i = 0; i < xs.length; i++) {
    if (ys[i] === null || !Number.isFinite(ys[i])) { pen = false; continue; }
    const [px, py] = [f.x(xs[i]), f.y(ys[i])];
    if (pen) ctx.lineTo(px, py); else ctx.moveTo(px, py);
    pen = true;
  }
  ctx.stroke();
  ctx.setLineDash([]);
}

function drawPlane(p) {
  const ctx = $("plane").getContext("2d");
  ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
  const shock = JSON.parse(shock_curve(p.family, p.order, p.correction));
  const tauMax = shock.tau[shock.tau.length - 1];
  const env = JSON.parse(envelope_curve(p.family, p.order, p.correction, tauMax, 200));
  const f = frame(ctx, [...env.x_plus, ...env.x_minus], [0, ...env.tau]);
  axes(ctx, f, "x", "t - t*");
  line(ctx, f, env.x_plus, env.tau, "#888");
  line(ctx, f, env.x_minus, env.tau, "#888");
  line(ctx, f, shock.phi, shock.tau, "#c22");
  if (p.tau > 0) line(ctx, f, f.bounds.slice(0, 2), [p.tau, p.tau], "#36c", [4, 4]);
}

function drawSlice(p) {
  const ctx = $("slice").getContext("2d");
  ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
  const s = JSON.parse(field_slice(p.family, p.order, p.correction, p.tau, 0.1, 801));
  const f = frame(ctx, s.x, s.u);
  axes(ctx, f, "x", "u");
  // draw each side of the shock separately so the jump is not bridged
  const split = s.shock ?? Infinity;
  const left = s.u.map((u, i) => (s.x[i] < split ? u : null));
  const right = s.u.map((u, i) => (s.x[i] > split ? u : null));
  line(ctx, f, s.x, left, "#222");
  line(ctx, f, s.x, right, "#222");
  if (s.shock !== null) line(ctx, f, [s.shock, s.shock], f.bounds.slice(2), "#c22", [4, 4]);
}

function redraw() {
  const p = params();
  $("tau-value").textContent = p.tau.toFixed(3);
  $("status").textContent = "";
  for (const draw of [drawPlane, drawSlice]) {
    try {
      draw(p);
    } catch (e) {
      $("status").textContent = String(e.message ?? e);
    }
  }
}

await init();
for (const id of ["family", "order", "correction", "tau"]) $(id).addEventListener("input", redraw);
redraw();
