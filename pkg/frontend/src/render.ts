// Canvas views: 2D point rendering for particle position blocks, grayscale
// heightfield for grid blocks. Enough to judge loop closure by eye; no
// shading or meshes.

export interface Projection {
    scale: number;
    offsetX: number;
    offsetY: number;
}

// Fit the x/y components of every element across all frames into the canvas.
export function fitProjection(
    data: Float32Array,
    comps: number,
    width: number,
    height: number,
    margin = 20,
): Projection {
    let minX = Infinity, maxX = -Infinity, minY = Infinity, maxY = -Infinity;
    for (let i = 0; i < data.length; i += comps) {
        const x = data[i];
        const y = comps > 1 ? data[i + 1] : 0;
        if (x < minX) minX = x;
        if (x > maxX) maxX = x;
        if (y < minY) minY = y;
        if (y > maxY) maxY = y;
    }
    const spanX = Math.max(maxX - minX, 1e-9);
    const spanY = Math.max(maxY - minY, 1e-9);
    const scale = Math.min((width - 2 * margin) / spanX, (height - 2 * margin) / spanY);
    return {
        scale,
        offsetX: margin - minX * scale + (width - 2 * margin - spanX * scale) / 2,
        offsetY: margin - minY * scale + (height - 2 * margin - spanY * scale) / 2,
    };
}

export function dataToCanvas(proj: Projection, x: number, y: number): [number, number] {
    return [x * proj.scale + proj.offsetX, y * proj.scale + proj.offsetY];
}

export function canvasToData(proj: Projection, px: number, py: number): [number, number] {
    return [(px - proj.offsetX) / proj.scale, (py - proj.offsetY) / proj.scale];
}

export function renderPoints(
    ctx: CanvasRenderingContext2D,
    frame: Float32Array,
    comps: number,
    proj: Projection,
): void {
    ctx.fillStyle = "#0b3d91";
    for (let i = 0; i < frame.length; i += comps) {
        const [cx, cy] = dataToCanvas(proj, frame[i], comps > 1 ? frame[i + 1] : 0);
        ctx.beginPath();
        ctx.arc(cx, cy, 4, 0, 2 * Math.PI);
        ctx.fill();
    }
}

export function renderHeightfield(
    ctx: CanvasRenderingContext2D,
    frame: Float32Array,
    gridWidth: number,
    gridHeight: number,
    lo: number,
    hi: number,
): void {
    const image = ctx.createImageData(gridWidth, gridHeight);
    const span = Math.max(hi - lo, 1e-12);
    for (let i = 0; i < gridWidth * gridHeight; i++) {
        const level = Math.min(Math.max((frame[i] - lo) / span, 0), 1);
        const shade = Math.round(255 * level);
        image.data[4 * i] = shade * 0.4;
        image.data[4 * i + 1] = shade * 0.7;
        image.data[4 * i + 2] = 255 - shade * 0.3;
        image.data[4 * i + 3] = 255;
    }
    // draw at grid resolution, then stretch to the canvas
    const off = new OffscreenCanvas(gridWidth, gridHeight);
    const offCtx = off.getContext("2d")!;
    offCtx.putImageData(image, 0, 0);
    ctx.imageSmoothingEnabled = false;
    ctx.drawImage(off, 0, 0, ctx.canvas.width, ctx.canvas.height);
}

export function drawSelectionRect(
    ctx: CanvasRenderingContext2D,
    x0: number,
    y0: number,
    x1: number,
    y1: number,
): void {
    ctx.strokeStyle = "#e04f00";
    ctx.lineWidth = 1.5;
    ctx.setLineDash([5, 3]);
    ctx.strokeRect(Math.min(x0, x1), Math.min(y0, y1),
                   Math.abs(x1 - x0), Math.abs(y1 - y0));
    ctx.setLineDash([]);
}
