/**
 * Description highlighting from server-provided span offsets.
 *
 * The task payload carries character offsets into the raw description
 * for every accepted entity link. Those offsets are used verbatim; the
 * client never re-tokenizes the text, so what gets marked is exactly
 * the substring the linker matched.
 */

export interface HighlightSpan {
    start: number;
    end: number;
    entity_id: string;
    kind: string;
}

export interface Segment {
    text: string;
    span: HighlightSpan | null;
}

/**
 * Split text into plain and highlighted segments.
 *
 * Spans are taken at face value but defensively filtered: anything out
 * of bounds or empty is dropped, and when two spans overlap the
 * leftmost (longest on ties) wins so the text renders once. Dropped
 * spans still appear in the evidence list beside the description.
 */
export function segmentText(
    text: string,
    spans: HighlightSpan[],
): Segment[] {
    const usable = spans
        .filter(
            (span) =>
                span.start >= 0 &&
                span.end <= text.length &&
                span.start < span.end,
        )
        .sort((a, b) => a.start - b.start || b.end - a.end);

    const segments: Segment[] = [];
    let cursor = 0;
    for (const span of usable) {
        if (span.start < cursor) {
            continue;
        }
        if (span.start > cursor) {
            segments.push({ text: text.slice(cursor, span.start), span: null });
        }
        segments.push({ text: text.slice(span.start, span.end), span });
        cursor = span.end;
    }
    if (cursor < text.length) {
        segments.push({ text: text.slice(cursor), span: null });
    }
    return segments;
}

export function escapeHtml(value: string): string {
    return value
        .replace(/&/g, "&amp;")
        .replace(/</g, "&lt;")
        .replace(/>/g, "&gt;")
        .replace(/"/g, "&quot;")
        .replace(/'/g, "&#39;");
}

/** Render the description as HTML with <mark> around each linked span. */
export function renderHighlighted(
    text: string,
    spans: HighlightSpan[],
): string {
    return segmentText(text, spans)
        .map((segment) => {
            const escaped = escapeHtml(segment.text);
            if (segment.span === null) {
                return escaped;
            }
            const entity = escapeHtml(segment.span.entity_id);
            const kind = escapeHtml(segment.span.kind);
            const title = `${kind}: ${entity}`;
            return (
                `<mark data-entity-id="${entity}" data-kind="${kind}"` +
                ` title="${title}">${escaped}</mark>`
            );
        })
        .join("");
}
