// View-side state: playback cursor, selection, and edit form serialization.
// Frames are never mutated here; every change flows through service responses.

import { EditBody } from "./api.js";
import { FrameSet, playbackCount } from "./frames.js";

export function wrapCursor(cursor: number, frameCount: number): number {
    if (frameCount < 1) throw new Error("frameCount must be >= 1");
    return ((cursor % frameCount) + frameCount) % frameCount;
}

export interface EditForm {
    direction: number[];
    frame: number;
    strength: number;
    width: number | null;
    wProfile: number | null;
}

export interface Selection {
    // data-space box over the first two position components, or explicit
    // element indices for non-spatial blocks
    box?: { lo: number[]; hi: number[] };
    indices?: number[];
}

export function selectionIsEmpty(selection: Selection | null): boolean {
    if (!selection) return true;
    if (selection.indices) return selection.indices.length === 0;
    if (selection.box) return false;
    return true;
}

export function parseDirection(text: string): number[] {
    const parts = text.split(",").map((p) => Number(p.trim()));
    if (parts.length === 0 || parts.some((v) => !Number.isFinite(v))) {
        throw new Error(`cannot parse direction from ${JSON.stringify(text)}`);
    }
    return parts;
}

// Serialize a selection + form into the request body. Values pass through
// unchanged so what was displayed is exactly what is sent.
export function editRequestBody(
    selection: Selection,
    form: EditForm,
    block: string,
): EditBody {
    const body: EditBody = {
        block,
        direction: form.direction,
        frame: form.frame,
        strength: form.strength,
    };
    if (selection.indices) body.region = selection.indices;
    if (selection.box) body.box = selection.box;
    if (form.width !== null) body.width = form.width;
    if (form.wProfile !== null) body.w_profile = form.wProfile;
    return body;
}

// Continuous playback over a frame set, wrapping seamlessly. The closing
// frame is skipped because it duplicates frame 0; swapping in a re-solved
// loop preserves the cursor position so playback never stutters.
export class Playback {
    cursor = 0;
    playing = true;
    private set: FrameSet | null = null;

    get frameSet(): FrameSet | null {
        return this.set;
    }

    get count(): number {
        return this.set ? playbackCount(this.set) : 0;
    }

    load(set: FrameSet): void {
        this.set = set;
        this.cursor = wrapCursor(this.cursor, playbackCount(set));
    }

    advance(steps = 1): number {
        if (!this.set) return 0;
        if (this.playing) {
            this.cursor = wrapCursor(this.cursor + steps, this.count);
        }
        return this.cursor;
    }

    toggle(): boolean {
        this.playing = !this.playing;
        return this.playing;
    }
}
