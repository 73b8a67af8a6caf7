// Typed client for the loop edit service.

import { FrameSet, parseFrameStream } from "./frames.js";

export interface SessionSummary {
    n: number;
    frames: number;
    fit_frames: number;
    r: number;
    m: number;
    closure_residual: number;
    blocks: string[];
    dt: number;
}

export interface SessionInfo {
    session_id: string;
    summary: SessionSummary;
    version: number;
}

export interface SessionConfig {
    dataset?: string;
    trajectory_path?: string;
    rank?: number;
    harmonics?: number;
    w_red?: number;
    w_u?: number;
    control_penalty?: string;
}

export interface BoxSelection {
    lo: number[];
    hi: number[];
}

export interface EditBody {
    region?: number[];
    box?: BoxSelection;
    block?: string;
    direction?: number[];
    frame: number;
    strength: number;
    width?: number;
    w_red?: number;
    w_u?: number;
    w_profile?: number;
}

export interface EditMetrics {
    closure_residual: number;
    profile_rmse: number;
    kkt_residual: number;
    solve_seconds: number;
}

export interface EditResponse {
    version: number;
    metrics: EditMetrics;
    basis_index: number;
    basis_count: number;
}

async function errorDetail(response: Response): Promise<string> {
    try {
        const body = await response.json();
        return body.detail ? String(body.detail) : response.statusText;
    } catch {
        return response.statusText;
    }
}

export class ServiceError extends Error {
    constructor(readonly status: number, detail: string) {
        super(detail);
    }
}

export class ServiceClient {
    constructor(readonly baseUrl: string) {}

    async health(): Promise<boolean> {
        try {
            const response = await fetch(`${this.baseUrl}/health`);
            return response.ok;
        } catch {
            return false;
        }
    }

    async createSession(config: SessionConfig): Promise<SessionInfo> {
        const response = await fetch(`${this.baseUrl}/sessions`, {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify(config),
        });
        if (!response.ok) {
            throw new ServiceError(response.status, await errorDetail(response));
        }
        return response.json();
    }

    async submitEdit(sessionId: string, edit: EditBody): Promise<EditResponse> {
        const response = await fetch(`${this.baseUrl}/sessions/${sessionId}/edits`, {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify(edit),
        });
        if (!response.ok) {
            throw new ServiceError(response.status, await errorDetail(response));
        }
        return response.json();
    }

    async fetchFrames(
        sessionId: string,
        opts: { stride?: number; block?: string; version?: number } = {},
    ): Promise<FrameSet> {
        const params = new URLSearchParams();
        if (opts.stride !== undefined) params.set("stride", String(opts.stride));
        if (opts.block !== undefined) params.set("block", opts.block);
        if (opts.version !== undefined) params.set("version", String(opts.version));
        const query = params.toString();
        const url = `${this.baseUrl}/sessions/${sessionId}/frames${query ? "?" + query : ""}`;
        const response = await fetch(url);
        if (!response.ok) {
            throw new ServiceError(response.status, await errorDetail(response));
        }
        return parseFrameStream(await response.arrayBuffer());
    }
}
