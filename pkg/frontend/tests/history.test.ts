import { describe, expect, it } from "vitest";

import { HistoryStack } from "../src/history.js";

describe("history stack", () => {
  it("back and forward walk the visit chain", () => {
    const h = new HistoryStack("a");
    h.visit("b");
    h.visit("c");
    expect(h.back()).toBe("b");
    expect(h.back()).toBe("a");
    expect(h.back()).toBeNull();
    expect(h.forward()).toBe("b");
    expect(h.forward()).toBe("c");
    expect(h.forward()).toBeNull();
  });

  it("a new visit clears the forward stack", () => {
    const h = new HistoryStack("a");
    h.visit("b");
    h.back();
    h.visit("c");
    expect(h.canForward).toBe(false);
    expect(h.current).toBe("c");
  });

  it("undoVisit rolls back without creating a forward entry", () => {
    const h = new HistoryStack("a");
    h.visit("b");
    expect(h.undoVisit()).toBe("a");
    expect(h.current).toBe("a");
    expect(h.canForward).toBe(false);
    expect(h.undoVisit()).toBeNull();
  });
});
