import { describe, expect, it } from "vitest";

import type { CurrentStep, OptionsPage } from "../src/api.js";
import { ExplorerStore } from "../src/state.js";

const STEP: CurrentStep = { kind: "diploma", concepts: [1] };

function page(n: number): OptionsPage {
  return {
    context_step: { kind: "diploma", title: null, concepts: [] },
    branches: [],
    top_concepts: [],
    more_available: false,
    page: n,
  };
}

describe("explorer state", () => {
  it("resets the page whenever the step changes", () => {
    const store = new ExplorerStore();
    store.setStep(STEP);
    store.storePage(page(0));
    store.page = 3;
    store.setStep({ kind: "job", concepts: [2] });
    expect(store.page).toBe(0);
    expect(store.cached(0)).toBeUndefined();
  });

  it("resets the page whenever the branch changes", () => {
    const store = new ExplorerStore();
    store.page = 2;
    store.setBranch("further_studies");
    expect(store.page).toBe(0);
  });

  it("resets the page whenever the goal changes", () => {
    const store = new ExplorerStore();
    store.page = 2;
    store.setGoal({ domain: "job", index: 4 });
    expect(store.page).toBe(0);
    store.page = 1;
    store.clearGoal();
    expect(store.page).toBe(0);
  });

  it("setting the same branch again is not a change", () => {
    const store = new ExplorerStore();
    store.setGoal({ domain: "job", index: 4 });
    store.storePage(page(0));
    store.page = 1;
    store.setBranch("job");
    expect(store.page).toBe(1);
    expect(store.goal).not.toBeNull();
    expect(store.cached(0)).toBeDefined();
  });

  it("switching branches drops the goal with the cache", () => {
    const store = new ExplorerStore();
    store.setGoal({ domain: "job", index: 4 });
    store.setBranch("further_studies");
    expect(store.goal).toBeNull();
  });

  it("caches pages by number and keeps the last good page", () => {
    const store = new ExplorerStore();
    store.storePage(page(0));
    store.storePage(page(1));
    store.page = 1;
    expect(store.currentPage?.page).toBe(1);
    store.page = 0;
    expect(store.currentPage?.page).toBe(0);
    store.setStep(STEP);
    expect(store.currentPage).toBeNull();
    expect(store.lastPage?.page).toBe(1);
  });

  it("storing a page clears a stale error", () => {
    const store = new ExplorerStore();
    store.error = "bad_page: page out of range";
    store.storePage(page(0));
    expect(store.error).toBeNull();
  });
});
