import init, { generate_trial, margin_sweep, censoring_curves, simulate_trial_summary } from "./pkg/winstat_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const fmt = (x, d = 4) => (x === null || x === undefined || Number.isNaN(x) ? "NA" : x.toFixed(d));

function table(head, rows) {
  const th = head.map((h) => `<th>${h}</th>`).join("");
  const body = rows.map((r) => `<tr>${r.map((c) => `<td>${c}</td>`).join("")}</tr>`).join("");
  return `<table><tr>${th}</tr>${body}</table>`;
}

function fail(where, e) {
  where.innerHTML = `<p class="err">${e.message ?? e}</p>`;
}

// Axes plus polylines; series = [{label, color, xs, ys, step}]
function plot(canvas, series, xmax, ymax, xlabel) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 36;
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#888";
  ctx.strokeRect(pad, 8, w - pad - 8, h - pad - 8);
  const X = (x) => pad + (x / xmax) * (w - pad - 8);
  const Y = (y) => h - pad - (y / ymax) * (h - pad - 16);
  ctx.fillStyle = "#333";
  ctx.font = "11px sans-serif";
  ctx.fillText("0", pad - 10, h - pad + 12);
  ctx.fillText(String(+xmax.toFixed(2)), w - 30, h - pad + 12);
  ctx.fillText(String(+ymax.toFixed(2)), 2, 16);
  ctx.fillText(xlabel, w / 2 - 20, h - 6);
  series.forEach((s, k) => {
    ctx.strokeStyle = s.color;
    ctx.beginPath();
    s.xs.forEach((x, i) => {
      if (s.ys[i] === null) return;
      if (i === 0) ctx.moveTo(X(x), Y(s.ys[i]));
      else {
        if (s.step) ctx.lineTo(X(x), Y(s.ys[i - 1]));
        ctx.lineTo(X(x), Y(s.ys[i]));
      }
    });
    ctx.stroke();
    ctx.fillStyle = s.color;
    ctx.fillText(s.label, w - 110, 24 + 14 * k);
  });
}

function ensureData() {
  if (!$("csv").value.trim()) $("csv").value = generate_trial(num("setting"), num("n"), num("tau"), num("seed"));
  return $("csv").value;
}

function onSweep() {
  const out = $("sweep-out");
  try {
    const pts = JSON.parse(margin_sweep(ensureData(), num("tau"), num("zmax"), num("steps")));
    out.innerHTML = table(
      ["margin", "P(win)", "P(loss)", "P(tie)", "WR", "95% CI"],
      pts.map((p) => [fmt(p.zeta, 2), fmt(p.pi_t), fmt(p.pi_c), fmt(p.pi_tie), fmt(p.wr, 3), `${fmt(p.ci_low, 3)} to ${fmt(p.ci_high, 3)}`]),
    );
    const xs = pts.map((p) => p.zeta);
    plot($("sweep-plot"), [
      { label: "P(win)", color: "#1f77b4", xs, ys: pts.map((p) => p.pi_t) },
      { label: "P(loss)", color: "#d62728", xs, ys: pts.map((p) => p.pi_c) },
      { label: "P(tie)", color: "#2ca02c", xs, ys: pts.map((p) => p.pi_tie) },
    ], Math.max(num("zmax"), 1e-9), 1, "margin");
  } catch (e) {
    fail(out, e);
  }
}

function onCurves() {
  try {
    const curves = JSON.parse(censoring_curves(ensureData(), num("tau")));
    const colors = { t: "#1f77b4", c: "#d62728" };
    plot($("curve-plot"), curves.map((c) => ({
      label: c.group === "t" ? "treatment" : "control",
      color: colors[c.group],
      xs: c.times,
      ys: c.survival,
      step: true,
    })), num("tau"), 1, "time");
  } catch (e) {
    fail($("sweep-out"), e);
  }
}

function onSimulate() {
  const out = $("sim-out");
  out.textContent = "running...";
  // let the browser paint before the blocking call
  setTimeout(() => {
    try {
      const t0 = performance.now();
      const r = JSON.parse(simulate_trial_summary(num("setting"), num("n"), num("tau"), num("zeta"), num("reps"), num("seed")));
      const secs = ((performance.now() - t0) / 1000).toFixed(1);
      out.innerHTML =
        `<p>True WR ${fmt(r.truth.wr, 3)} (P(win) ${fmt(r.truth.pi_t)}, P(loss) ${fmt(r.truth.pi_c)}); ${r.reps} replications in ${secs} s.</p>` +
        table(
          ["method", "bias WR", "ASE", "ESE", "coverage", "rejection", "failed"],
          r.rows.map((x) => [x.method, fmt(x.bias_wr), fmt(x.ase), fmt(x.ese), fmt(x.cp, 3), fmt(x.rejection, 3), x.failed]),
        );
    } catch (e) {
      fail(out, e);
    }
  }, 20);
}

await init();
$("status").textContent = "Ready. Generate a trial or paste your own data.";
$("generate").onclick = () => {
  try {
    $("csv").value = generate_trial(num("setting"), num("n"), num("tau"), num("seed"));
  } catch (e) {
    fail($("sweep-out"), e);
  }
};
$("sweep").onclick = onSweep;
$("curves").onclick = onCurves;
$("simulate").onclick = onSimulate;
