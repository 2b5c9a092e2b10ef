import init, { noise, sample_cliques, Demo } from "./pkg/semspace_wasm_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
let demo = null;

function guard(fn) {
  return () => {
    $("err").textContent = "";
    try {
      fn();
    } catch (e) {
      $("err").textContent = String(e.message ?? e);
    }
  };
}

function drawNoise(r) {
  const c = $("n-plot");
  const g = c.getContext("2d");
  g.clearRect(0, 0, c.width, c.height);
  const pad = 30;
  const xs = r.bin_centers;
  const xmax = 5 * r.theoretical_std;
  const xmin = -xmax;
  // Histogram bins and the pmf lattice coincide in seed mode. In composite
  // mode the bins are finer, so lattice mass is spread over the bins it spans.
  const lattice = r.theoretical.length === xs.length;
  const spacing = r.theoretical.length > 1 ? r.theoretical[1][0] - r.theoretical[0][0] : 1;
  const scale = lattice ? 1 : r.bin_width / spacing;
  const theory = r.theoretical.map(([x, p]) => [x, p * scale]);
  const ymax = Math.max(...r.empirical, ...theory.map((t) => t[1]), 1e-12) * 1.1;
  const px = (x) => pad + ((x - xmin) / (xmax - xmin)) * (c.width - 2 * pad);
  const py = (p) => c.height - pad - (p / ymax) * (c.height - 2 * pad);
  const w = Math.max(1, (r.bin_width / (xmax - xmin)) * (c.width - 2 * pad) * 0.45);

  g.strokeStyle = "#999";
  g.beginPath();
  g.moveTo(pad, c.height - pad);
  g.lineTo(c.width - pad, c.height - pad);
  g.stroke();
  g.fillStyle = "#555";
  g.font = "11px sans-serif";
  for (const t of [xmin, 0, xmax]) g.fillText(t.toFixed(3), px(t) - 12, c.height - 10);

  xs.forEach((x, i) => {
    if (x < xmin || x > xmax) return;
    g.fillStyle = "#ff7f0e";
    g.fillRect(px(x), py(r.empirical[i]), w, py(0) - py(r.empirical[i]));
  });
  for (const [x, p] of theory) {
    if (x < xmin || x > xmax) continue;
    if (lattice) {
      g.fillStyle = "#1f77b4";
      g.fillRect(px(x) - w, py(p), w, py(0) - py(p));
    } else {
      g.strokeStyle = "#1f77b4";
      g.beginPath();
      g.moveTo(px(x), py(0));
      g.lineTo(px(x), py(p));
      g.stroke();
    }
  }
  g.strokeStyle = "#888";
  g.beginPath();
  let started = false;
  for (const [x, p] of r.gaussian) {
    if (x < xmin || x > xmax) continue;
    started ? g.lineTo(px(x), py(p)) : g.moveTo(px(x), py(p));
    started = true;
  }
  g.stroke();
}

function runNoise() {
  const r = JSON.parse(noise(num("n-dim"), num("n-m"), $("n-mode").value, $("n-law").value, num("n-samples"), num("n-seed")));
  drawNoise(r);
  const band = r.band_pass === null ? "" : ` · 4σ band ${r.band_pass ? "PASS" : "FAIL"}`;
  $("n-stats").textContent =
    `theoretical σ ${r.theoretical_std.toFixed(5)} · sampled σ ${r.empirical_std.toFixed(5)} · ` +
    `mean ${r.empirical_mean.toExponential(2)} · max |Δp| ${r.max_abs_deviation.toExponential(2)}${band}`;
}

function build() {
  demo?.free();
  demo = new Demo($("s-cliques").value, num("s-dim"), num("s-m"), num("s-seed"));
  const s = JSON.parse(demo.summary());
  const extra = s.degenerate.length ? ` · degenerate: ${s.degenerate.join(", ")}` : "";
  $("s-summary").textContent = `${s.terms} terms, ${s.cliques} cliques${extra}`;
  rank();
  cluster();
}

function rank() {
  const r = JSON.parse(demo.neighbors($("q-term").value, num("q-k"), $("q-minus").value));
  $("q-table").innerHTML = "";
  for (const n of r.entries) {
    const row = $("q-table").insertRow();
    row.insertCell().textContent = n.similarity.toFixed(3);
    row.insertCell().textContent = n.term;
  }
}

function cluster() {
  const r = JSON.parse(demo.clusters($("c-term").value, $("c-minus").value, num("c-merge")));
  const out = $("c-out");
  out.innerHTML = "";
  for (const c of r.clusters) {
    const div = document.createElement("div");
    div.className = "cluster";
    const head = document.createElement("b");
    head.textContent = `${c.score.toFixed(3)} [${c.label.join("; ")}]`;
    div.append(head, document.createElement("br"));
    div.append(c.members.map((m) => `${m.term} ${m.similarity.toFixed(3)}`).join(", "));
    out.append(div);
  }
}

await init();
$("s-cliques").value = sample_cliques();
$("n-run").onclick = guard(runNoise);
$("s-build").onclick = guard(build);
$("q-run").onclick = guard(rank);
$("c-run").onclick = guard(cluster);
guard(runNoise)();
guard(build)();
