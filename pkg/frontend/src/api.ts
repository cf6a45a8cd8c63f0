/**
 * Typed client for the transaction review API.
 *
 * The interfaces mirror the JSON the service emits field for field, so
 * the rest of the UI never touches untyped response data. Failures are
 * surfaced as ApiError carrying the HTTP status and the service's error
 * code; callers branch on those (409 means someone else answered first)
 * instead of matching message strings.
 */

export const KIND_VERIFY = "VerifyRisk";
export const KIND_RATE = "RateRisk";

export interface EvidenceEntry {
    entity_id: string;
    score: number;
}

export interface EvidenceSpan {
    start: number;
    end: number;
    surface: string;
    entity_id: string;
    kind: string;
}

export interface TaskPayload {
    transaction: Record<string, string | number>;
    risk_labels: string[];
    evidence: EvidenceEntry[];
    spans?: EvidenceSpan[];
}

export interface TaskView {
    task_id: string;
    artifact_id: string;
    kind: string;
    payload: TaskPayload;
    status: string;
    created_at: string;
}

export interface SubmitResult {
    task: TaskView;
    follow_up?: TaskView;
}

export interface ReviewStats {
    open: number;
    answered: number;
    label_counts: Record<string, number>;
    kb_version: number;
}

export interface TransactionDetail {
    artifact_id: string;
    record: Record<string, string | number>;
    verdict: Record<string, unknown>;
    links: Array<Record<string, unknown>>;
}

export interface AnswerPayload {
    answer: boolean | number;
    annotator_id: string;
}

export class ApiError extends Error {
    readonly status: number;
    readonly code: string;

    constructor(status: number, code: string, message: string) {
        super(message);
        this.name = "ApiError";
        this.status = status;
        this.code = code;
    }
}

/**
 * Validate an answer against the task kind before it goes on the wire.
 *
 * VerifyRisk takes a boolean, RateRisk an integer rating in 1..5; the
 * service rejects anything else with a 400, and a well-behaved client
 * never sends such a request in the first place.
 */
export function buildAnswerPayload(
    kind: string,
    answer: boolean | number,
    annotatorId: string,
): AnswerPayload {
    if (!annotatorId) {
        throw new Error("annotator id must be non-empty");
    }
    if (kind === KIND_VERIFY) {
        if (typeof answer !== "boolean") {
            throw new Error(`${KIND_VERIFY} expects a yes/no answer`);
        }
    } else if (kind === KIND_RATE) {
        if (typeof answer !== "number" || !Number.isInteger(answer)) {
            throw new Error(`${KIND_RATE} expects an integer rating`);
        }
        if (answer < 1 || answer > 5) {
            throw new Error(`rating ${answer} outside 1..5`);
        }
    } else {
        throw new Error(`unknown task kind ${kind}`);
    }
    return { answer, annotator_id: annotatorId };
}

async function errorFrom(response: Response): Promise<ApiError> {
    let code = "error";
    let message = `HTTP ${response.status}`;
    try {
        const body = await response.json();
        if (body && typeof body.code === "string") {
            code = body.code;
        }
        if (body && typeof body.message === "string") {
            message = body.message;
        }
    } catch {
        // Not a JSON error body; keep the generic message.
    }
    return new ApiError(response.status, code, message);
}

export class ReviewApi {
    private readonly baseUrl: string;

    constructor(baseUrl: string = "") {
        this.baseUrl = baseUrl.replace(/\/$/, "");
    }

    /** Next open task, or null when the queue is empty (204). */
    async nextTask(kind?: string): Promise<TaskView | null> {
        const query = kind ? `?kind=${encodeURIComponent(kind)}` : "";
        const response = await fetch(`${this.baseUrl}/api/tasks/next${query}`);
        if (response.status === 204) {
            return null;
        }
        if (!response.ok) {
            throw await errorFrom(response);
        }
        return (await response.json()) as TaskView;
    }

    async task(taskId: string): Promise<TaskView> {
        const response = await fetch(
            `${this.baseUrl}/api/tasks/${encodeURIComponent(taskId)}`,
        );
        if (!response.ok) {
            throw await errorFrom(response);
        }
        return (await response.json()) as TaskView;
    }

    /**
     * Submit one answer. On a VerifyRisk "yes" the result carries the
     * spawned RateRisk task as follow_up so the caller can advance to it
     * without another queue fetch.
     */
    async submitAnswer(
        taskId: string,
        kind: string,
        answer: boolean | number,
        annotatorId: string,
    ): Promise<SubmitResult> {
        const payload = buildAnswerPayload(kind, answer, annotatorId);
        const response = await fetch(
            `${this.baseUrl}/api/tasks/${encodeURIComponent(taskId)}/response`,
            {
                method: "POST",
                headers: { "Content-Type": "application/json" },
                body: JSON.stringify(payload),
            },
        );
        if (!response.ok) {
            throw await errorFrom(response);
        }
        return (await response.json()) as SubmitResult;
    }

    async stats(): Promise<ReviewStats> {
        const response = await fetch(`${this.baseUrl}/api/stats`);
        if (!response.ok) {
            throw await errorFrom(response);
        }
        return (await response.json()) as ReviewStats;
    }

    async transaction(artifactId: string): Promise<TransactionDetail> {
        const response = await fetch(
            `${this.baseUrl}/api/transactions/${encodeURIComponent(artifactId)}`,
        );
        if (!response.ok) {
            throw await errorFrom(response);
        }
        return (await response.json()) as TransactionDetail;
    }
}
