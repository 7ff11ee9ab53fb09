// Browser-style page history for the BACK/FORWARD commands, plus undo for a
// cancelled selection.

export class HistoryStack {
  private past: string[] = [];
  private future: string[] = [];

  constructor(public current: string) {}

  /** Follow a link: the current page goes onto the back stack. */
  visit(pageId: string): void {
    this.past.push(this.current);
    this.current = pageId;
    this.future = [];
  }

  back(): string | null {
    const prev = this.past.pop();
    if (prev === undefined) return null;
    this.future.push(this.current);
    this.current = prev;
    return prev;
  }

  forward(): string | null {
    const next = this.future.pop();
    if (next === undefined) return null;
    this.past.push(this.current);
    this.current = next;
    return next;
  }

  /** Undo the most recent visit (a cancelled selection); unlike back(), the
   * undone page does not become a forward target. */
  undoVisit(): string | null {
    const prev = this.past.pop();
    if (prev === undefined) return null;
    this.current = prev;
    return prev;
  }

  get canBack(): boolean {
    return this.past.length > 0;
  }

  get canForward(): boolean {
    return this.future.length > 0;
  }
}
