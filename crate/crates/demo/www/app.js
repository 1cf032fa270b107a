import init, { WasmDemo } from "./pkg/fluoroplan_demo.js";

const $ = (id) => document.getElementById(id);
const views = ["AP", "LP"];
let demo = null;
let state = null;

function rebuild() {
  const gain = Number($("gain").value), offset = Number($("offset").value);
  $("gainv").textContent = gain.toFixed(2);
  $("offsetv").textContent = offset.toFixed(1);
  try {
    demo = new WasmDemo(Number($("levels").value), BigInt($("seed").value || 0), gain, offset, $("correct").checked);
    $("error").textContent = "";
  } catch (e) {
    demo = null;
    $("error").textContent = String(e);
  }
  refresh();
}

function refresh() {
  state = demo ? JSON.parse(demo.state()) : null;
  for (const v of views) draw(v);
  report();
}

function capsule(ctx, p, color, width) {
  ctx.strokeStyle = color;
  ctx.lineCap = "round";
  ctx.lineWidth = width;
  ctx.beginPath();
  ctx.moveTo(...p.target_px);
  ctx.lineTo(...p.entry_px);
  ctx.stroke();
}

function draw(view) {
  const ctx = $(view).getContext("2d");
  ctx.clearRect(0, 0, 512, 512);
  if (!state) return;
  const key = view.toLowerCase();
  const uncorrected = state.raw_annotations.filter((b) => b.view === view);
  const boxes = state.annotations.filter((b) => b.view === view);
  ctx.lineWidth = 1;
  ctx.setLineDash([4, 4]);
  ctx.strokeStyle = "#777";
  for (const b of uncorrected) ctx.strokeRect(b.x_min, b.y_min, b.x_max - b.x_min, b.y_max - b.y_min);
  ctx.setLineDash([]);
  ctx.font = "12px sans-serif";
  for (const b of boxes) {
    ctx.fillStyle = "rgba(90, 200, 110, 0.12)";
    ctx.fillRect(b.x_min, b.y_min, b.x_max - b.x_min, b.y_max - b.y_min);
    ctx.strokeStyle = "#5c6";
    ctx.strokeRect(b.x_min, b.y_min, b.x_max - b.x_min, b.y_max - b.y_min);
    ctx.fillStyle = "#5c6";
    ctx.fillText(b.label, b.x_max + 4, b.y_min + 12);
  }
  if ($("truth").checked) {
    for (const t of state.truth) capsule(ctx, t.projections[key], "rgba(255, 220, 80, 0.15)", 2 * t.projections[key].radius_px);
  }
  for (const s of state.screws) {
    const p = s.projections[key];
    capsule(ctx, p, s.warnings.some((w) => w.code.endsWith("OutOfBox")) ? "rgba(240, 110, 110, 0.7)" : "rgba(110, 170, 240, 0.7)", 2 * p.radius_px);
    ctx.lineWidth = 1.5;
    for (const [pt, color] of [[p.target_px, "#fff"], [p.entry_px, "#fc6"]]) {
      ctx.strokeStyle = color;
      ctx.beginPath();
      ctx.arc(pt[0], pt[1], 8, 0, 2 * Math.PI);
      ctx.stroke();
    }
  }
}

function report() {
  if (!state) {
    $("model").textContent = "";
    $("screws").innerHTML = "";
    return;
  }
  const m = state.discrepancy;
  $("model").textContent = `LP correction: z_AP = ${m.gain_a.toFixed(4)} * z_LP + ${m.offset_b_mm.toFixed(3)} mm`;
  const rows = state.screws.map((s) => {
    const spec = s.spec;
    const fmt = (x) => (x == null ? "-" : x.toFixed(1));
    const warn = s.warnings.map((w) => w.code).join(", ");
    return `<tr><td>${s.screw.label}-${s.screw.side}</td><td>${spec.length_mm.toFixed(1)}</td><td>${fmt(spec.catalog_length_mm)}</td>` +
      `<td>${spec.diameter_mm.toFixed(1)}</td><td>${fmt(spec.catalog_diameter_mm)}</td>` +
      `<td class="${s.in_corridor ? "good" : "bad"}">${s.in_corridor ? "yes" : "no"}</td><td class="bad">${warn}</td></tr>`;
  });
  $("screws").innerHTML = "<tr><th>screw</th><th>length mm</th><th>catalog</th><th>diameter mm</th><th>catalog</th><th>in corridor</th><th>warnings</th></tr>" + rows.join("");
}

function pointer(view) {
  const canvas = $(view);
  const at = (e) => {
    const r = canvas.getBoundingClientRect();
    return [(e.clientX - r.left) * (canvas.width / r.width), (e.clientY - r.top) * (canvas.height / r.height)];
  };
  const cursors = { body: "move", target_endpoint: "crosshair", entry_endpoint: "crosshair", none: "default" };
  canvas.addEventListener("pointerdown", (e) => {
    if (!demo) return;
    if (demo.pointerDown(view, ...at(e)) !== "none") canvas.setPointerCapture(e.pointerId);
  });
  canvas.addEventListener("pointermove", (e) => {
    if (!demo) return;
    if (demo.pointerMove(...at(e))) refresh();
    else canvas.style.cursor = cursors[demo.hover(view, ...at(e))];
  });
  canvas.addEventListener("pointerup", () => demo && demo.pointerUp());
  canvas.addEventListener("wheel", (e) => {
    if (demo && demo.wheel(view, ...at(e), e.deltaY < 0 ? 0.25 : -0.25)) {
      e.preventDefault();
      refresh();
    }
  }, { passive: false });
}

await init();
for (const id of ["levels", "seed", "gain", "offset", "correct"]) $(id).addEventListener("input", rebuild);
$("truth").addEventListener("change", refresh);
$("plan").addEventListener("click", () => {
  if (!demo) return;
  try {
    demo.initAll();
  } catch (e) {
    $("error").textContent = String(e);
  }
  refresh();
});
for (const v of views) pointer(v);
rebuild();
