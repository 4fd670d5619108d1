/**
 * DOM rendering for the walkthrough client.
 * Renderers replace their container's content wholesale from the view model,
 * so the page is always a pure function of the last server payloads.
 */

import type {
    ComparePane,
    MetricStrip,
    ObjectCard,
    ReaderEntry,
    SessionView,
    StoryTreeView,
} from './model.js';

const SVG_NS = 'http://www.w3.org/2000/svg';

function el(tag: string, className?: string, text?: string): HTMLElement {
    const node = document.createElement(tag);
    if (className) node.className = className;
    if (text !== undefined) node.textContent = text;
    return node;
}

export function renderCards(
    container: HTMLElement,
    cards: ObjectCard[],
    onScan: (card: ObjectCard) => void,
): void {
    container.replaceChildren();
    for (const card of cards) {
        const box = el('div', `card role-${card.role}`);
        const title = el('div', 'card-title', card.name);
        title.append(el('span', `role-badge ${card.role}`, card.role));
        box.append(title);
        if (card.stateLabel) {
            box.append(el('div', 'card-state', `state: ${card.stateLabel}`));
        }
        if (card.metaphor) {
            box.append(el('div', 'metaphor-badge', card.metaphor));
        }
        box.append(
            el(
                'div',
                'card-meta',
                card.sceneId ? `anchor: ${card.sceneId}` : 'unanchored',
            ),
        );
        const button = el('button', 'scan-button', `scan (${card.scanCount})`);
        button.addEventListener('click', () => onScan(card));
        box.append(button);
        container.append(box);
    }
}

export function renderTree(svg: SVGSVGElement, tree: StoryTreeView): void {
    svg.replaceChildren();
    svg.setAttribute('viewBox', `0 0 ${tree.width} ${tree.height + 60}`);
    const positions = new Map(tree.nodes.map((n) => [n.id, n]));
    for (const edge of tree.edges) {
        const from = positions.get(edge.from);
        const to = positions.get(edge.to);
        if (!from || !to) continue;
        const line = document.createElementNS(SVG_NS, 'line');
        line.setAttribute('x1', String(from.x));
        line.setAttribute('y1', String(from.y));
        line.setAttribute('x2', String(to.x));
        line.setAttribute('y2', String(to.y));
        line.setAttribute('class', 'tree-edge');
        svg.append(line);
    }
    for (const node of tree.nodes) {
        const group = document.createElementNS(SVG_NS, 'g');
        group.setAttribute('class', `tree-node ${node.kind} ${node.status}`);
        const shape = document.createElementNS(SVG_NS, node.kind === 'beat' ? 'rect' : 'circle');
        if (node.kind === 'beat') {
            shape.setAttribute('x', String(node.x - 44));
            shape.setAttribute('y', String(node.y - 18));
            shape.setAttribute('width', '88');
            shape.setAttribute('height', '36');
            shape.setAttribute('rx', '8');
        } else {
            shape.setAttribute('cx', String(node.x));
            shape.setAttribute('cy', String(node.y));
            shape.setAttribute('r', '14');
        }
        group.append(shape);
        const label = document.createElementNS(SVG_NS, 'text');
        label.setAttribute('x', String(node.x));
        label.setAttribute('y', String(node.y + (node.kind === 'beat' ? 5 : 30)));
        label.setAttribute('text-anchor', 'middle');
        label.textContent = node.label;
        group.append(label);
        svg.append(group);
    }
}

export function renderReader(
    container: HTMLElement,
    entries: ReaderEntry[],
    openFragment: string | null,
    onToggle: (fragment: string, open: boolean) => void,
): void {
    container.replaceChildren();
    if (!entries.length) {
        container.append(el('p', 'reader-empty', 'Nothing activated yet - scan an object.'));
        return;
    }
    for (const entry of entries) {
        const item = el('div', 'reader-entry');
        const header = el('button', 'reader-header', `${entry.name} - ${entry.topic}`);
        const isOpen = openFragment === entry.name;
        header.addEventListener('click', () => onToggle(entry.name, !isOpen));
        item.append(header);
        if (isOpen) {
            item.append(el('p', 'reader-symbol', entry.symbolicMeaning));
            item.append(el('p', 'reader-content', entry.content));
        }
        container.append(item);
    }
}

export function renderStrip(container: HTMLElement, strip: MetricStrip): void {
    container.replaceChildren();
    container.append(el('span', 'strip-cell', strip.beatLabel));
    container.append(
        el('span', 'strip-cell', strip.completed ? 'mainstory complete' : 'in progress'),
    );
    container.append(el('span', 'strip-cell', `${strip.eventCount} events`));
    container.append(el('span', 'strip-cell', `${strip.totalScans} scans`));
    const durations = strip.viewDurations
        .map(([name, s]) => `${name}: ${s.toFixed(1)}s`)
        .join(', ');
    container.append(el('span', 'strip-cell', durations || 'no reading time yet'));
    container.append(el('span', 'strip-cell path', strip.path.join(' > ')));
}

export function renderSession(
    root: {
        cards: HTMLElement;
        tree: SVGSVGElement;
        reader: HTMLElement;
        strip: HTMLElement;
        triggers: HTMLElement;
    },
    view: SessionView,
    openFragment: string | null,
    handlers: {
        onScan: (card: ObjectCard) => void;
        onToggle: (fragment: string, open: boolean) => void;
    },
): void {
    renderCards(root.cards, view.cards, handlers.onScan);
    renderTree(root.tree, view.tree);
    renderReader(root.reader, view.reader, openFragment, handlers.onToggle);
    renderStrip(root.strip, view.strip);
    root.triggers.replaceChildren();
    for (const trigger of view.pendingTriggers) {
        root.triggers.append(
            el('li', 'trigger-item', `${trigger.fragment}: ${trigger.unmet}`),
        );
    }
}

export function renderComparePanes(
    container: HTMLElement,
    panes: ComparePane[],
    onRate: (story: string, value: number) => void,
): void {
    container.replaceChildren();
    for (const pane of panes) {
        const box = el('div', `compare-pane strategy-${pane.strategy}`);
        box.append(el('h3', undefined, pane.strategy.toUpperCase()));
        box.append(
            el(
                'div',
                'compare-meta',
                `${pane.fragmentCount} fragments - key: ${pane.keyObjects.join(', ')}`,
            ),
        );
        if (pane.highlights.length) {
            const list = el('ul', 'metaphor-highlights');
            for (const highlight of pane.highlights) {
                list.append(
                    el('li', 'metaphor-badge', `${highlight.objectName}: ${highlight.metaphor}`),
                );
            }
            box.append(list);
        }
        for (const beat of pane.beats) {
            box.append(el('p', 'compare-beat', beat));
        }
        if (pane.unboundObjects.length) {
            box.append(
                el('div', 'compare-warning', `unanchored: ${pane.unboundObjects.join(', ')}`),
            );
        }
        const rating = el('div', 'rating-row');
        rating.append(el('span', undefined, 'Interesting (1-7): '));
        for (let value = 1; value <= 7; value += 1) {
            const button = el('button', 'rating-button', String(value));
            button.addEventListener('click', () => onRate(pane.strategy, value));
            rating.append(button);
        }
        box.append(rating);
        container.append(box);
    }
}
