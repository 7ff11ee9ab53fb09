// Measure the rendered geometry and build the PAGE_LAYOUT payload.  The
// payload keeps the measured client coordinates unrounded, so what the
// server stores is exactly what the browser laid out (well within 1 px).

import type { ButtonBox, CommandName, LayoutPayload, LinkBox } from "./protocol.js";

export interface Rect {
  left: number;
  top: number;
  width: number;
  height: number;
}

export interface MeasuredLink {
  id: number;
  rect: Rect;
  label?: string;
}

export interface MeasuredButton {
  command: CommandName;
  rect: Rect;
}

export function buildPayload(screenW: number, screenH: number,
                             links: MeasuredLink[], buttons: MeasuredButton[]): LayoutPayload {
  const linkBoxes: LinkBox[] = links.map((l) => ({
    id: l.id,
    left: l.rect.left,
    top: l.rect.top,
    width: l.rect.width,
    height: l.rect.height,
    ...(l.label !== undefined ? { label: l.label } : {}),
  }));
  const buttonBoxes: ButtonBox[] = buttons.map((b) => ({
    command: b.command,
    left: b.rect.left,
    top: b.rect.top,
    width: b.rect.width,
    height: b.rect.height,
  }));
  return { screen: [screenW, screenH], links: linkBoxes, buttons: buttonBoxes };
}

/** Worst per-edge difference between measured rects and a payload. */
export function payloadMismatch(payload: LayoutPayload, links: MeasuredLink[]): number {
  let worst = 0;
  for (const link of links) {
    const box = payload.links.find((l) => l.id === link.id);
    if (!box) return Infinity;
    worst = Math.max(
      worst,
      Math.abs(box.left - link.rect.left),
      Math.abs(box.top - link.rect.top),
      Math.abs(box.width - link.rect.width),
      Math.abs(box.height - link.rect.height),
    );
  }
  return worst;
}

/** Collect link/button rects from the DOM (client coordinates, the same
 * space mouse events report). */
export function collectRects(root: Document): { links: MeasuredLink[]; buttons: MeasuredButton[] } {
  const links: MeasuredLink[] = [];
  root.querySelectorAll<HTMLElement>("[data-link-id]").forEach((el) => {
    const r = el.getBoundingClientRect();
    links.push({
      id: Number(el.dataset.linkId),
      rect: { left: r.left, top: r.top, width: r.width, height: r.height },
      label: el.textContent ?? undefined,
    });
  });
  links.sort((a, b) => a.id - b.id);
  const buttons: MeasuredButton[] = [];
  root.querySelectorAll<HTMLElement>("[data-command]").forEach((el) => {
    const r = el.getBoundingClientRect();
    buttons.push({
      command: el.dataset.command as CommandName,
      rect: { left: r.left, top: r.top, width: r.width, height: r.height },
    });
  });
  return { links, buttons };
}
