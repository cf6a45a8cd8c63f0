/**
 * Controller for the single-page review app.
 *
 * All durable state lives behind the API; this class only holds what
 * the current screen needs (the task in view, a picked rating, an
 * answer retained after a network failure). Refreshing the page
 * therefore loses nothing but the unsent click.
 */

import type { ReviewStats, SubmitResult, TaskView } from "./api.js";
import { ApiError, ReviewApi } from "./api.js";
import {
    renderEmptyState,
    renderNotice,
    renderPendingBanner,
    renderRetryBanner,
    renderShell,
    renderStatsPanel,
    renderTaskCard,
} from "./views.js";

/** The slice of ReviewApi the controller uses; tests stub this. */
export interface TaskApi {
    nextTask(kind?: string): Promise<TaskView | null>;
    submitAnswer(
        taskId: string,
        kind: string,
        answer: boolean | number,
        annotatorId: string,
    ): Promise<SubmitResult>;
    stats(): Promise<ReviewStats>;
}

export interface AppOptions {
    baseUrl?: string;
    api?: TaskApi;
    annotatorId?: string;
    pollMs?: number;
}

interface PendingAnswer {
    taskId: string;
    kind: string;
    answer: boolean | number;
}

function randomAnnotatorId(): string {
    return `officer-${Math.random().toString(36).slice(2, 10)}`;
}

export class ReviewApp {
    readonly annotatorId: string;

    private readonly root: HTMLElement;
    private readonly api: TaskApi;
    private readonly pollMs: number;
    private timer: ReturnType<typeof setInterval> | null = null;

    private task: TaskView | null = null;
    private selectedRating: number | null = null;
    private submitting = false;
    private pending: PendingAnswer | null = null;
    private notice: string | null = null;
    private loadError: string | null = null;
    private loading = false;
    private stats: ReviewStats | null = null;
    private statsOffline = false;

    constructor(root: HTMLElement, options: AppOptions = {}) {
        this.root = root;
        this.api = options.api ?? new ReviewApi(options.baseUrl ?? "");
        this.annotatorId = options.annotatorId ?? randomAnnotatorId();
        this.pollMs = options.pollMs ?? 3000;
    }

    async start(): Promise<void> {
        this.root.innerHTML = renderShell();
        this.root.addEventListener("click", (event) => {
            this.onClick(event);
        });
        await this.refreshStats();
        this.timer = setInterval(() => {
            void this.refreshStats();
        }, this.pollMs);
        await this.loadNext();
    }

    stop(): void {
        if (this.timer !== null) {
            clearInterval(this.timer);
            this.timer = null;
        }
    }

    // -- event wiring -----------------------------------------------------

    private onClick(event: Event): void {
        let node = event.target as Element | null;
        while (node !== null && node !== this.root) {
            const action = (node as HTMLElement).dataset?.action;
            if (action) {
                this.dispatch(action, node as HTMLElement);
                return;
            }
            node = node.parentElement;
        }
    }

    private dispatch(action: string, element: HTMLElement): void {
        switch (action) {
            case "answer-yes":
                void this.submit(true);
                break;
            case "answer-no":
                void this.submit(false);
                break;
            case "pick-rating": {
                if (this.submitting) {
                    break;
                }
                const value = Number(element.dataset.value);
                this.selectedRating = value;
                this.renderTask();
                break;
            }
            case "submit-rating":
                if (this.selectedRating !== null) {
                    void this.submit(this.selectedRating);
                }
                break;
            case "retry-load":
                void this.loadNext();
                break;
            case "retry-submit":
                void this.retryPending();
                break;
            default:
                break;
        }
    }

    // -- task flow --------------------------------------------------------

    private async loadNext(): Promise<void> {
        this.loadError = null;
        this.loading = true;
        this.renderTask();
        try {
            this.task = await this.api.nextTask();
            this.selectedRating = null;
        } catch {
            this.task = null;
            this.loadError = "Cannot reach the review service.";
        }
        this.loading = false;
        this.renderTask();
    }

    private async submit(answer: boolean | number): Promise<void> {
        if (this.task === null || this.submitting) {
            return;
        }
        await this.send({
            taskId: this.task.task_id,
            kind: this.task.kind,
            answer,
        });
    }

    private async retryPending(): Promise<void> {
        if (this.pending === null || this.submitting) {
            return;
        }
        await this.send(this.pending);
    }

    private async send(attempt: PendingAnswer): Promise<void> {
        this.submitting = true;
        this.renderTask();
        let result: SubmitResult;
        try {
            result = await this.api.submitAnswer(
                attempt.taskId,
                attempt.kind,
                attempt.answer,
                this.annotatorId,
            );
        } catch (error) {
            this.submitting = false;
            if (error instanceof ApiError) {
                this.pending = null;
                this.notice =
                    error.status === 409
                        ? "Task was already answered in another session."
                        : `Answer rejected: ${error.message}`;
                this.task = null;
                await this.loadNext();
            } else {
                // Network failure: keep the answer so a retry resends it
                // exactly as clicked.
                this.pending = attempt;
                this.renderTask();
            }
            return;
        }
        this.submitting = false;
        this.pending = null;
        this.notice = null;
        void this.refreshStats();
        if (result.follow_up) {
            this.task = result.follow_up;
            this.selectedRating = null;
            this.renderTask();
        } else {
            this.task = null;
            await this.loadNext();
        }
    }

    private async refreshStats(): Promise<void> {
        try {
            this.stats = await this.api.stats();
            this.statsOffline = false;
        } catch {
            this.statsOffline = true;
        }
        this.renderStats();
    }

    // -- rendering --------------------------------------------------------

    private renderTask(): void {
        const area = this.root.querySelector("#task-area");
        if (area === null) {
            return;
        }
        const parts: string[] = [];
        if (this.notice !== null) {
            parts.push(renderNotice(this.notice));
        }
        if (this.loadError !== null) {
            parts.push(renderRetryBanner(this.loadError));
        } else if (this.pending !== null) {
            parts.push(renderPendingBanner());
            if (this.task !== null) {
                parts.push(
                    renderTaskCard(this.task, {
                        selectedRating: this.selectedRating,
                        submitting: true,
                    }),
                );
            }
        } else if (this.loading) {
            parts.push('<p class="muted">Loading next task…</p>');
        } else if (this.task !== null) {
            parts.push(
                renderTaskCard(this.task, {
                    selectedRating: this.selectedRating,
                    submitting: this.submitting,
                }),
            );
        } else {
            parts.push(renderEmptyState());
        }
        area.innerHTML = parts.join("\n");
    }

    private renderStats(): void {
        const area = this.root.querySelector("#stats-area");
        if (area === null) {
            return;
        }
        area.innerHTML = renderStatsPanel(this.stats, this.statsOffline);
    }
}

/** Create, start and return the app; the entry point for index.html. */
export function mount(root: HTMLElement, options: AppOptions = {}): ReviewApp {
    const app = new ReviewApp(root, options);
    void app.start();
    return app;
}
