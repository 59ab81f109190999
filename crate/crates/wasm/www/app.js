import init, { solve_grid, phantom_slice } from "./pkg/negspread_wasm.js";

function drawImage(canvas, values, size, lo, hi) {
  const ctx = canvas.getContext("2d");
  const img = ctx.createImageData(size, size);
  for (let i = 0; i < values.length; i++) {
    const v = values[i];
    const t = Math.max(0, Math.min(1, (v - lo) / (hi - lo)));
    // negatives in red, non-negatives in grey levels
    const [r, g, b] = v < 0 ? [255, 255 * (1 - t), 255 * (1 - t)] : [255 * t, 255 * t, 255 * t];
    img.data.set([r, g, b, 255], 4 * i);
  }
  const tmp = new OffscreenCanvas(size, size);
  tmp.getContext("2d").putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(tmp, 0, 0, canvas.width, canvas.height);
}

function fmt(x) {
  return Math.abs(x) >= 1e4 || (x !== 0 && Math.abs(x) < 1e-3) ? x.toExponential(3) : x.toFixed(4);
}

function showError(el, e) {
  el.textContent = String(e.message ?? e);
  el.classList.add("error");
}

// line
const line = document.getElementById("line");
const lineStats = document.getElementById("line-stats");
const N = 32;
let lineValues;

function resetLine() {
  lineValues = Array.from({ length: N }, (_, i) => 0.5 + 0.3 * Math.sin(i / 3));
  lineValues[10] = -0.6;
  lineValues[11] = -0.2;
  lineValues[22] = -0.8;
  renderLine();
}

function renderLine() {
  const ctx = line.getContext("2d");
  const { width, height } = line;
  const mid = height / 2;
  const scale = height / 2.4;
  const w = width / N;
  ctx.clearRect(0, 0, width, height);
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.moveTo(0, mid);
  ctx.lineTo(width, mid);
  ctx.stroke();
  lineStats.classList.remove("error");
  let result = null;
  let y, alpha;
  try {
    result = solve_grid(Float64Array.from(lineValues), N, 1, "1d-2");
    y = result.y;
    alpha = result.alpha;
  } catch (e) {
    showError(lineStats, e);
  }
  for (let i = 0; i < N; i++) {
    ctx.fillStyle = "#bbb";
    ctx.fillRect(i * w + 2, mid, w / 2 - 2, -lineValues[i] * scale);
    if (result) {
      ctx.fillStyle = "#2a6fdb";
      ctx.fillRect(i * w + w / 2, mid, w / 2 - 2, -y[i] * scale);
      if (alpha[i] > 0) {
        ctx.fillStyle = "#e8871e";
        ctx.fillRect(i * w + 2, height - 4 - alpha[i] * scale, w - 4, 3);
      }
    }
  }
  if (result) {
    const sum = (a) => a.reduce((s, v) => s + v, 0);
    lineStats.textContent =
      `sum in   ${fmt(sum(lineValues))}\nsum out  ${fmt(y.reduce((s, v) => s + v, 0))}\n` +
      `transfer ${fmt(result.objective)}\nsweeps   ${result.outer_iterations}`;
    result.free();
  }
}

function editLine(ev) {
  if (ev.buttons !== 1 && ev.type !== "click") return;
  const r = line.getBoundingClientRect();
  const i = Math.floor(((ev.clientX - r.left) / r.width) * N);
  const v = (line.height / 2 - ((ev.clientY - r.top) / r.height) * line.height) / (line.height / 2.4);
  if (i >= 0 && i < N) {
    lineValues[i] = Math.max(-1.2, Math.min(1.2, v));
    renderLine();
  }
}
line.addEventListener("mousemove", editLine);
line.addEventListener("click", editLine);
document.getElementById("line-reset").onclick = resetLine;

// image
const S = 24;
const imgIn = document.getElementById("img-in");
const imgOut = document.getElementById("img-out");
const imgStats = document.getElementById("img-stats");
const imgMask = document.getElementById("img-mask");
let image;

function resetImage() {
  image = new Float64Array(S * S).fill(1);
  renderImage();
}

function renderImage() {
  imgStats.classList.remove("error");
  drawImage(imgIn, image, S, -4, 4);
  try {
    const r = solve_grid(image, S, S, imgMask.value);
    const y = r.y;
    drawImage(imgOut, y, S, -4, 4);
    imgStats.textContent =
      `min out  ${fmt(Math.min(...y))}\ntransfer ${fmt(r.objective)}\n` +
      `updates  ${r.site_updates}\nsweeps   ${r.outer_iterations}`;
    r.free();
  } catch (e) {
    showError(imgStats, e);
  }
}

imgIn.addEventListener("click", (ev) => {
  const r = imgIn.getBoundingClientRect();
  const cx = ((ev.clientX - r.left) / r.width) * S;
  const cy = ((ev.clientY - r.top) / r.height) * S;
  const amp = ev.shiftKey ? 3 : -4;
  for (let y = 0; y < S; y++) {
    for (let x = 0; x < S; x++) {
      const d2 = (x + 0.5 - cx) ** 2 + (y + 0.5 - cy) ** 2;
      image[y * S + x] += amp * Math.exp(-d2 / 3);
    }
  }
  renderImage();
});
imgMask.onchange = renderImage;
document.getElementById("img-reset").onclick = resetImage;

// phantom slice
const phStats = document.getElementById("ph-stats");

function drawProfile(canvas, radius, before, after, coldRadius) {
  const ctx = canvas.getContext("2d");
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  const all = [...before, ...after];
  const lo = Math.min(0, ...all);
  const hi = Math.max(...all);
  const rmax = radius[radius.length - 1] + 0.5;
  const px = (r) => 30 + ((width - 40) * r) / rmax;
  const py = (v) => height - 20 - ((height - 30) * (v - lo)) / (hi - lo || 1);
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.moveTo(px(coldRadius), 0);
  ctx.lineTo(px(coldRadius), height);
  ctx.moveTo(0, py(0));
  ctx.lineTo(width, py(0));
  ctx.stroke();
  for (const [series, colour] of [[before, "#999"], [after, "#2a6fdb"]]) {
    ctx.strokeStyle = colour;
    ctx.beginPath();
    Array.from(series).forEach((v, k) => (k ? ctx.lineTo(px(radius[k]), py(v)) : ctx.moveTo(px(radius[k]), py(v))));
    ctx.stroke();
  }
  ctx.fillStyle = "#222";
  ctx.fillText("mean vs distance from rod axis (grey: noisy, blue: processed)", 30, 12);
}

function runPhantom() {
  phStats.classList.remove("error");
  const size = Number(document.getElementById("ph-size").value);
  const sigma = Number(document.getElementById("ph-sigma").value);
  const seed = BigInt(document.getElementById("ph-seed").value);
  try {
    const t0 = performance.now();
    const r = phantom_slice(size, sigma, seed);
    const ms = performance.now() - t0;
    const hi = 2 * 177e3;
    drawImage(document.getElementById("ph-in"), r.noisy, r.size, -hi / 2, hi);
    drawImage(document.getElementById("ph-out"), r.processed, r.size, -hi / 2, hi);
    drawProfile(document.getElementById("ph-profile"), r.profile_radius, r.profile_before, r.profile_after, r.cold_radius);
    phStats.textContent =
      `cold voxels negative ${(100 * r.cold_negative_fraction).toFixed(1)}%\n` +
      `cold RMSE            ${fmt(r.cold_rmse_before)} -> ${fmt(r.cold_rmse_after)}\n` +
      `time                 ${ms.toFixed(0)} ms`;
    r.free();
  } catch (e) {
    showError(phStats, e);
  }
}
document.getElementById("ph-run").onclick = runPhantom;

await init();
resetLine();
resetImage();
runPhantom();
