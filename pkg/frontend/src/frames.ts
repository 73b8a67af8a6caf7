// Parsing for the service's binary frame stream: one JSON preamble line
// followed by little-endian float32 frame data. The stream covers the loop
// plus its closing frame (last row equals the first by the closure
// constraint), so playback cycles over frames - 1 rows.

export interface FrameSet {
    nBlock: number;
    frames: number;
    version: number;
    data: Float32Array;
}

export function parseFrameStream(buf: ArrayBuffer): FrameSet {
    const bytes = new Uint8Array(buf);
    const newline = bytes.indexOf(0x0a);
    if (newline < 0) {
        throw new Error("frame stream has no preamble line");
    }
    const preambleText = new TextDecoder().decode(bytes.subarray(0, newline));
    let preamble: { n_block: number; frames: number; version: number };
    try {
        preamble = JSON.parse(preambleText);
    } catch (err) {
        throw new Error(`malformed frame preamble: ${err}`);
    }
    const expected = preamble.frames * preamble.n_block * 4;
    const payload = buf.slice(newline + 1); // copy so the view is 4-byte aligned
    if (payload.byteLength !== expected) {
        throw new Error(
            `frame payload size mismatch: expected ${expected} bytes, got ${payload.byteLength}`,
        );
    }
    return {
        nBlock: preamble.n_block,
        frames: preamble.frames,
        version: preamble.version,
        data: new Float32Array(payload),
    };
}

export function frameAt(set: FrameSet, index: number): Float32Array {
    if (index < 0 || index >= set.frames) {
        throw new Error(`frame index ${index} out of range 0..${set.frames - 1}`);
    }
    return set.data.subarray(index * set.nBlock, (index + 1) * set.nBlock);
}

export function maxAbsDiff(a: Float32Array, b: Float32Array): number {
    let worst = 0;
    for (let i = 0; i < a.length; i++) {
        const gap = Math.abs(a[i] - b[i]);
        if (gap > worst) worst = gap;
    }
    return worst;
}

// Distance between the loop's closing frame and its first frame; tiny when
// the closure constraint held.
export function seamGap(set: FrameSet): number {
    return maxAbsDiff(frameAt(set, 0), frameAt(set, set.frames - 1));
}

// Rows that playback should cycle over (the closing frame duplicates row 0).
export function playbackCount(set: FrameSet): number {
    return Math.max(set.frames - 1, 1);
}
