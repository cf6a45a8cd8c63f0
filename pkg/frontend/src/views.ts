/**
 * Pure HTML builders for the review screens.
 *
 * Everything here is a string-in, string-out function so the rendering
 * can be unit tested without a browser; the controller owns state and
 * event wiring. All dynamic values pass through escapeHtml.
 */

import type { ReviewStats, TaskView } from "./api.js";
import { KIND_RATE, KIND_VERIFY } from "./api.js";
import { escapeHtml, renderHighlighted } from "./highlight.js";

export const RATING_LABEL = "5 is the highest level of risk";
export const VERIFY_QUESTION = "Does this transaction carry the flagged risk?";
export const RATE_QUESTION = "How severe is the risk?";
export const RATING_VALUES = [1, 2, 3, 4, 5];

const TRANSACTION_FIELD_ORDER = [
    "customer_id",
    "bank_name",
    "transaction_date",
    "transaction_type",
    "amount",
];

export interface TaskCardOptions {
    selectedRating: number | null;
    submitting: boolean;
}

function transactionRows(transaction: Record<string, string | number>): string {
    const keys = TRANSACTION_FIELD_ORDER.filter((key) => key in transaction);
    for (const key of Object.keys(transaction).sort()) {
        if (!keys.includes(key) && key !== "description") {
            keys.push(key);
        }
    }
    return keys
        .map((key) => {
            const label = escapeHtml(key.replace(/_/g, " "));
            const value = escapeHtml(String(transaction[key]));
            return `<tr><th scope="row">${label}</th><td>${value}</td></tr>`;
        })
        .join("");
}

function riskLabelChips(labels: string[]): string {
    if (labels.length === 0) {
        return '<span class="muted">none</span>';
    }
    return labels
        .map((label) => `<span class="chip">${escapeHtml(label)}</span>`)
        .join("");
}

function evidenceList(task: TaskView): string {
    const entries = task.payload.evidence;
    if (entries.length === 0) {
        return '<p class="muted">No linked entities.</p>';
    }
    const items = entries
        .map((entry) => {
            const entity = escapeHtml(entry.entity_id);
            const score = escapeHtml(String(entry.score));
            return (
                `<li><code>${entity}</code>` +
                ` <span class="muted">score ${score}</span></li>`
            );
        })
        .join("");
    return `<ul class="evidence">${items}</ul>`;
}

function verifyControls(submitting: boolean): string {
    const disabled = submitting ? " disabled" : "";
    return `
        <p class="question">${escapeHtml(VERIFY_QUESTION)}</p>
        <div class="controls">
            <button data-action="answer-yes"${disabled}>Yes</button>
            <button data-action="answer-no" class="secondary"${disabled}>No</button>
        </div>
    `;
}

function rateControls(selectedRating: number | null, submitting: boolean): string {
    const disabled = submitting ? " disabled" : "";
    const buttons = RATING_VALUES.map((value) => {
        const pressed = value === selectedRating ? ' aria-pressed="true"' : "";
        const selected = value === selectedRating ? " selected" : "";
        return (
            `<button data-action="pick-rating" data-value="${value}"` +
            ` class="rating${selected}"${pressed}${disabled}>${value}</button>`
        );
    }).join("");
    const submitDisabled = submitting || selectedRating === null ? " disabled" : "";
    return `
        <p class="question">${escapeHtml(RATE_QUESTION)}</p>
        <div class="controls rating-scale" aria-label="${escapeHtml(RATING_LABEL)}">
            ${buttons}
        </div>
        <p class="muted rating-hint">${escapeHtml(RATING_LABEL)}</p>
        <div class="controls">
            <button data-action="submit-rating"${submitDisabled}>Submit rating</button>
        </div>
    `;
}

export function renderTaskCard(task: TaskView, options: TaskCardOptions): string {
    const spans = task.payload.spans ?? [];
    const description = String(task.payload.transaction.description ?? "");
    const controls =
        task.kind === KIND_VERIFY
            ? verifyControls(options.submitting)
            : rateControls(options.selectedRating, options.submitting);
    return `
        <article class="task-card" data-task-id="${escapeHtml(task.task_id)}" data-kind="${escapeHtml(task.kind)}">
            <header>
                <span class="kind">${escapeHtml(task.kind)}</span>
                <span class="muted">${escapeHtml(task.task_id)}</span>
            </header>
            <p class="description">${renderHighlighted(description, spans)}</p>
            <table class="transaction"><tbody>${transactionRows(task.payload.transaction)}</tbody></table>
            <h3>Predicted risk labels</h3>
            <div class="chips">${riskLabelChips(task.payload.risk_labels)}</div>
            <h3>Linked entities</h3>
            ${evidenceList(task)}
            ${controls}
        </article>
    `;
}

export function renderEmptyState(): string {
    return `
        <div class="empty-state">
            <h2>Queue empty</h2>
            <p>No open tasks right now. New tasks appear after the next pipeline run.</p>
            <button data-action="retry-load" class="secondary">Check again</button>
        </div>
    `;
}

export function renderRetryBanner(message: string): string {
    return `
        <div class="banner error">
            <p>${escapeHtml(message)}</p>
            <button data-action="retry-load">Retry</button>
        </div>
    `;
}

export function renderPendingBanner(): string {
    return `
        <div class="banner warning">
            <p>Could not reach the service. Your answer is kept locally.</p>
            <button data-action="retry-submit">Retry submit</button>
        </div>
    `;
}

export function renderNotice(message: string): string {
    return `<div class="banner notice"><p>${escapeHtml(message)}</p></div>`;
}

export function renderStatsPanel(
    stats: ReviewStats | null,
    offline: boolean,
): string {
    if (stats === null) {
        return '<p class="muted">Loading progress…</p>';
    }
    const risky = stats.label_counts["1"] ?? 0;
    const benign = stats.label_counts["0"] ?? 0;
    const marker = offline
        ? '<p class="muted offline">service unreachable, showing last known numbers</p>'
        : "";
    return `
        <dl class="stats">
            <div><dt>Open</dt><dd data-stat="open">${stats.open}</dd></div>
            <div><dt>Answered</dt><dd data-stat="answered">${stats.answered}</dd></div>
            <div><dt>Labeled risky</dt><dd data-stat="risky">${risky}</dd></div>
            <div><dt>Labeled not risky</dt><dd data-stat="benign">${benign}</dd></div>
            <div><dt>KB version</dt><dd data-stat="kb-version">${stats.kb_version}</dd></div>
        </dl>
        ${marker}
    `;
}

export function renderShell(): string {
    return `
        <header class="app-header">
            <h1>Transaction review</h1>
            <p class="muted">Verify flagged transactions and rate confirmed risks.</p>
        </header>
        <main>
            <section id="task-area" aria-live="polite"></section>
            <aside id="stats-area" aria-label="Progress"></aside>
        </main>
    `;
}
