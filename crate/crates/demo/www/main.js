import init, { decay_curve, angle_density, steady_state } from "./pkg/backaction_demo.js";

const $ = (id) => document.getElementById(id);

function plot(canvas, series, { logY = false, xLabel = "", yLabel = "" } = {}) {
  const ctx = canvas.getContext("2d");
  const W = canvas.width, H = canvas.height;
  const pad = { l: 56, r: 12, t: 12, b: 36 };
  ctx.clearRect(0, 0, W, H);
  const ty = (v) => (logY ? Math.log10(Math.max(v, 1e-300)) : v);
  let xs = [], ys = [];
  for (const s of series) {
    xs = xs.concat(s.x);
    ys = ys.concat(s.y.filter((v) => !logY || v > 0).map(ty));
  }
  const x0 = Math.min(...xs), x1 = Math.max(...xs);
  let y0 = Math.min(...ys), y1 = Math.max(...ys);
  if (y1 === y0) y1 = y0 + 1;
  const px = (x) => pad.l + ((x - x0) / (x1 - x0)) * (W - pad.l - pad.r);
  const py = (y) => H - pad.b - ((ty(y) - y0) / (y1 - y0)) * (H - pad.t - pad.b);

  ctx.strokeStyle = "#888";
  ctx.lineWidth = 1;
  ctx.strokeRect(pad.l, pad.t, W - pad.l - pad.r, H - pad.t - pad.b);
  ctx.fillStyle = "#444";
  ctx.font = "12px sans-serif";
  ctx.textAlign = "center";
  for (let i = 0; i <= 4; i++) {
    const x = x0 + ((x1 - x0) * i) / 4;
    ctx.fillText(x.toFixed(2), px(x), H - pad.b + 14);
  }
  ctx.fillText(xLabel, (W + pad.l) / 2, H - 4);
  ctx.textAlign = "right";
  for (let i = 0; i <= 4; i++) {
    const y = y0 + ((y1 - y0) * i) / 4;
    const yy = H - pad.b - (i / 4) * (H - pad.t - pad.b);
    ctx.fillText(logY ? "1e" + y.toFixed(1) : y.toFixed(2), pad.l - 4, yy + 4);
  }
  ctx.save();
  ctx.translate(12, (H - pad.b) / 2);
  ctx.rotate(-Math.PI / 2);
  ctx.textAlign = "center";
  ctx.fillText(yLabel, 0, 0);
  ctx.restore();

  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.lineWidth = 2;
    ctx.setLineDash(s.dashed ? [6, 4] : []);
    ctx.beginPath();
    let started = false;
    for (let i = 0; i < s.x.length; i++) {
      if (logY && !(s.y[i] > 0)) continue;
      const X = px(s.x[i]), Y = py(s.y[i]);
      if (started) ctx.lineTo(X, Y);
      else { ctx.moveTo(X, Y); started = true; }
    }
    ctx.stroke();
  }
  ctx.setLineDash([]);
}

function split(v, parts) {
  const n = v.length / parts;
  return Array.from({ length: parts }, (_, k) => Array.from(v.slice(k * n, (k + 1) * n)));
}

function runDecay() {
  const out = $("dc-out");
  out.className = "out";
  out.textContent = "running...";
  setTimeout(() => {
    try {
      const t0 = performance.now();
      const v = decay_curve(+$("dc-n").value, +$("dc-h").value, +$("dc-seed").value);
      const [t, mc, fp] = split(v, 3);
      plot($("dc-plot"), [
        { x: t, y: mc, color: "#1f77b4" },
        { x: t, y: fp, color: "#d62728", dashed: true },
      ], { logY: true, xLabel: "κt", yLabel: "⟨P_e⟩" });
      out.textContent = `solid: Monte Carlo, dashed: Fokker-Planck   (${((performance.now() - t0) / 1000).toFixed(1)} s)`;
    } catch (e) {
      out.className = "out err";
      out.textContent = String(e);
    }
  }, 10);
}

function runDensity() {
  const x0 = +$("fp-x0").value, t = +$("fp-t").value;
  $("fp-label").textContent = `x₀ = ${x0.toFixed(2)}, t = ${t.toFixed(2)}`;
  try {
    const [x, p] = split(angle_density(t, x0, 128), 2);
    const [xi, pi] = split(angle_density(0, x0, 128), 2);
    plot($("fp-plot"), [
      { x: xi, y: pi, color: "#aaa", dashed: true },
      { x, y: p, color: "#2ca02c" },
    ], { xLabel: "signed angle x", yLabel: "density" });
  } catch (e) {
    $("fp-label").textContent = String(e);
  }
}

function runSteady() {
  const out = $("ss-out");
  out.className = "out";
  out.textContent = "running...";
  setTimeout(() => {
    try {
      const g = +$("ss-g").value;
      const [dg, dgSe, hp, hpSe] = steady_state(g, +$("ss-n").value, 1);
      out.textContent =
        `γ = ${g}\n` +
        `diffusion gradient      P_e = ${dg.toExponential(3)} ± ${dgSe.toExponential(1)}\n` +
        `parallel Hamiltonian    P_e = ${hp.toExponential(3)} ± ${hpSe.toExponential(1)}`;
    } catch (e) {
      out.className = "out err";
      out.textContent = String(e);
    }
  }, 10);
}

await init();
$("dc-run").addEventListener("click", runDecay);
$("ss-run").addEventListener("click", runSteady);
$("fp-x0").addEventListener("input", runDensity);
$("fp-t").addEventListener("input", runDensity);
runDensity();
