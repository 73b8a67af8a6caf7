// Browser editor: create a session against the edit service, watch the
// synthesized loop play back, drag a region on the canvas, and submit
// localized edits. All state changes flow through service responses.

import { ServiceClient, ServiceError, SessionInfo } from "./api.js";
import { frameAt, seamGap } from "./frames.js";
import { EditForm, Playback, Selection, editRequestBody, parseDirection, selectionIsEmpty, wrapCursor } from "./playback.js";
import { Projection, canvasToData, drawSelectionRect, fitProjection, renderHeightfield, renderPoints } from "./render.js";

const FPS = 30;

const $ = (id: string) => document.getElementById(id)!;
const canvas = $("view") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const banner = $("banner");
const metricsLine = $("metrics");
const submitButton = $("submit") as HTMLButtonElement;

let client = new ServiceClient("http://127.0.0.1:8008");
let session: SessionInfo | null = null;
let playback = new Playback();
let projection: Projection | null = null;
let selection: Selection | null = null;
let dragStart: [number, number] | null = null;
let dragNow: [number, number] | null = null;
let pendingEdit = false;
let block = "positions";
let comps = 3;
let heightGrid = 0; // nonzero when rendering a height block as a grid
let heightRange: [number, number] = [0, 1];

function showError(message: string) {
    banner.textContent = message;
    banner.style.display = message ? "block" : "none";
}

function updateSubmitState() {
    submitButton.disabled = pendingEdit || selectionIsEmpty(selection) || !session;
}

// --- session connection -----------------------------------------------------

async function connectAndLoad() {
    showError("");
    const base = ($("service-url") as HTMLInputElement).value.trim();
    client = new ServiceClient(base);
    if (!(await client.health())) {
        showError(`cannot reach service at ${base}`);
        return;
    }
    const dataset = ($("dataset") as HTMLSelectElement).value;
    const resumed = window.location.hash.slice(1);
    try {
        if (resumed) {
            // resume the session referenced in the URL if it still exists
            try {
                await loadFrames(resumed);
                session = { session_id: resumed, summary: null as never, version: playback.frameSet!.version };
                $("session-label").textContent = `session ${resumed.slice(0, 8)} (resumed)`;
                updateSubmitState();
                return;
            } catch {
                window.location.hash = "";
            }
        }
        session = await client.createSession({ dataset });
        window.location.hash = session.session_id;
        $("session-label").textContent =
            `session ${session.session_id.slice(0, 8)}: n=${session.summary.n} ` +
            `r=${session.summary.r} m=${session.summary.m} T=${session.summary.fit_frames}`;
        block = session.summary.blocks.includes("positions") ? "positions" : session.summary.blocks[0];
        await loadFrames(session.session_id);
        showMetrics(`baseline closure ${session.summary.closure_residual.toExponential(2)}`);
    } catch (err) {
        showError(err instanceof Error ? err.message : String(err));
    }
    updateSubmitState();
}

async function loadFrames(sessionId: string) {
    const set = await client.fetchFrames(sessionId, { block });
    const elements = block === "positions" ? set.nBlock / 3 : set.nBlock;
    comps = block === "positions" ? 3 : 1;
    if (comps === 1) {
        // square grid assumption for builtin height fields
        heightGrid = Math.round(Math.sqrt(elements));
        let lo = Infinity, hi = -Infinity;
        for (const v of set.data) {
            if (v < lo) lo = v;
            if (v > hi) hi = v;
        }
        heightRange = [lo, hi];
        projection = null;
    } else {
        heightGrid = 0;
        projection = fitProjection(set.data, comps, canvas.width, canvas.height);
    }
    playback.load(set); // preserves the cursor: no playback hitch on swap
}

// --- edits -------------------------------------------------------------------

function currentForm(): EditForm {
    return {
        direction: parseDirection(($("direction") as HTMLInputElement).value),
        frame: Number(($("frame") as HTMLInputElement).value),
        strength: Number(($("strength") as HTMLInputElement).value),
        width: ($("width") as HTMLInputElement).value === "" ? null
            : Number(($("width") as HTMLInputElement).value),
        wProfile: null,
    };
}

async function submitEdit() {
    if (!session || !selection || pendingEdit) return;
    pendingEdit = true;
    updateSubmitState();
    showError("");
    try {
        const body = editRequestBody(selection, currentForm(), block);
        const response = await client.submitEdit(session.session_id, body);
        await loadFrames(session.session_id);
        showMetrics(
            `v${response.version}: closure ${response.metrics.closure_residual.toExponential(2)}, ` +
            `solve ${(response.metrics.solve_seconds * 1e3).toFixed(1)} ms, ` +
            `seam(f32) ${seamGap(playback.frameSet!).toExponential(2)}`,
        );
    } catch (err) {
        if (err instanceof ServiceError && err.status === 422) {
            showError(`region not expressible in reduced basis (${err.message})`);
        } else {
            showError(err instanceof Error ? err.message : String(err));
        }
    } finally {
        pendingEdit = false;
        updateSubmitState();
    }
}

function showMetrics(text: string) {
    metricsLine.textContent = text;
}

// --- selection ---------------------------------------------------------------

function selectionFromDrag(): Selection | null {
    if (!dragStart || !dragNow || !playback.frameSet) return null;
    const [x0, y0] = dragStart;
    const [x1, y1] = dragNow;
    if (Math.abs(x1 - x0) < 3 || Math.abs(y1 - y0) < 3) return null;
    if (projection) {
        // rectangle in data space over the first frame's positions
        const [ax, ay] = canvasToData(projection, Math.min(x0, x1), Math.min(y0, y1));
        const [bx, by] = canvasToData(projection, Math.max(x0, x1), Math.max(y0, y1));
        const big = 1e9;
        return {
            box: {
                lo: [Math.min(ax, bx), Math.min(ay, by), -big],
                hi: [Math.max(ax, bx), Math.max(ay, by), big],
            },
        };
    }
    if (heightGrid > 0) {
        // rectangle in grid cells for height fields
        const sx = canvas.width / heightGrid;
        const sy = canvas.height / heightGrid;
        const indices: number[] = [];
        for (let gy = 0; gy < heightGrid; gy++) {
            for (let gx = 0; gx < heightGrid; gx++) {
                const cx = (gx + 0.5) * sx;
                const cy = (gy + 0.5) * sy;
                if (cx >= Math.min(x0, x1) && cx <= Math.max(x0, x1)
                    && cy >= Math.min(y0, y1) && cy <= Math.max(y0, y1)) {
                    indices.push(gy * heightGrid + gx);
                }
            }
        }
        return indices.length ? { indices } : null;
    }
    return null;
}

canvas.addEventListener("mousedown", (event) => {
    const rect = canvas.getBoundingClientRect();
    dragStart = [event.clientX - rect.left, event.clientY - rect.top];
    dragNow = dragStart;
});
canvas.addEventListener("mousemove", (event) => {
    if (!dragStart) return;
    const rect = canvas.getBoundingClientRect();
    dragNow = [event.clientX - rect.left, event.clientY - rect.top];
});
canvas.addEventListener("mouseup", () => {
    selection = selectionFromDrag();
    dragStart = null;
    $("selection-label").textContent = selection
        ? (selection.indices ? `${selection.indices.length} cells` : "box selection")
        : "none";
    updateSubmitState();
});

// --- playback loop -----------------------------------------------------------

function draw() {
    const set = playback.frameSet;
    ctx.fillStyle = "#f7f7f4";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
    if (set) {
        const frame = frameAt(set, wrapCursor(playback.cursor, set.frames));
        if (heightGrid > 0) {
            renderHeightfield(ctx, frame, heightGrid, heightGrid,
                              heightRange[0], heightRange[1]);
        } else if (projection) {
            renderPoints(ctx, frame, comps, projection);
        }
        $("cursor-label").textContent = `frame ${playback.cursor + 1}/${playback.count}`;
    }
    if (dragStart && dragNow) {
        drawSelectionRect(ctx, dragStart[0], dragStart[1], dragNow[0], dragNow[1]);
    }
}

setInterval(() => {
    playback.advance();
    draw();
}, 1000 / FPS);

// --- wiring ------------------------------------------------------------------

$("connect").addEventListener("click", () => void connectAndLoad());
$("submit").addEventListener("click", () => void submitEdit());
$("toggle").addEventListener("click", () => {
    const playing = playback.toggle();
    $("toggle").textContent = playing ? "Pause" : "Play";
});
updateSubmitState();
