/** DOM construction for the explorer. Every concept, count, and share
 * shown here comes straight out of an API response held in the store;
 * the view layer adds no data of its own.
 */

import type { ConceptRef, OptionsPage, RankedConcept } from "./api.js";
import type { ExplorerStore } from "./state.js";

export interface ViewHandlers {
  selectGoal(concept: ConceptRef): void;
  clearGoal(): void;
  nextPage(): void;
  prevPage(): void;
  chooseBranch(branch: "job" | "further_studies"): void;
  runEvaluation(): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

function renderError(message: string): HTMLElement {
  return el("div", "error", message);
}

function renderGoal(goal: ConceptRef, handlers: ViewHandlers): HTMLElement {
  const chip = el("div", "goal");
  const label = goal.label ?? `${goal.domain} #${goal.index}`;
  chip.appendChild(el("span", "goal-label", `goal: ${label}`));
  const clear = el("button", "clear-goal", "clear goal");
  clear.addEventListener("click", () => handlers.clearGoal());
  chip.appendChild(clear);
  return chip;
}

function renderBranches(
  page: OptionsPage,
  active: string,
  handlers: ViewHandlers,
): HTMLElement {
  const list = el("ul", "branches");
  for (const share of page.branches) {
    const item = el("li", "branch");
    const pick = el(
      "button",
      share.branch === active ? "branch-pick active" : "branch-pick",
      `${share.branch.replace("_", " ")} ${Math.round(share.share * 100)}%`,
    );
    pick.dataset.branch = share.branch;
    pick.addEventListener("click", () => handlers.chooseBranch(share.branch));
    item.appendChild(pick);
    list.appendChild(item);
  }
  return list;
}

function renderOption(
  concept: RankedConcept,
  handlers: ViewHandlers,
): HTMLElement {
  const item = el("li");
  const button = el("button", "option", `${concept.label} (${concept.count})`);
  button.dataset.domain = concept.domain;
  button.dataset.index = String(concept.index);
  button.addEventListener("click", () =>
    handlers.selectGoal({
      domain: concept.domain,
      index: concept.index,
      label: concept.label,
    }),
  );
  item.appendChild(button);
  return item;
}

/** The ranked-concepts area: up to one pack of choices, a control to pull
 * the next pack while the server reports more, and a terminal notice once
 * a page comes back empty. */
export function renderOptions(
  store: ExplorerStore,
  handlers: ViewHandlers,
): HTMLElement {
  const root = el("div", "options-view");
  const page = store.currentPage ?? store.lastPage;
  if (page === null) {
    root.appendChild(
      el("p", "placeholder", "enter a current step to see suggestions"),
    );
    return root;
  }
  if (page.top_concepts.length === 0) {
    root.appendChild(el("p", "no-further-options", "no further options"));
  } else {
    const list = el("ol", "options");
    for (const concept of page.top_concepts) {
      list.appendChild(renderOption(concept, handlers));
    }
    root.appendChild(list);
  }
  const nav = el("nav", "pager");
  if (store.page > 0) {
    const back = el("button", "back", "back");
    back.addEventListener("click", () => handlers.prevPage());
    nav.appendChild(back);
  }
  if (page.more_available) {
    const more = el("button", "more", "more résumé");
    more.addEventListener("click", () => handlers.nextPage());
    nav.appendChild(more);
  }
  if (nav.childElementCount > 0) {
    root.appendChild(nav);
  }
  return root;
}

function renderEvaluation(
  store: ExplorerStore,
  handlers: ViewHandlers,
): HTMLElement {
  const panel = el("div", "evaluation");
  const run = el("button", "run-eval", "evaluate this branch");
  run.disabled = store.evaluation.phase === "pending";
  run.addEventListener("click", () => handlers.runEvaluation());
  panel.appendChild(run);
  const view = store.evaluation;
  if (view.phase === "pending") {
    panel.appendChild(el("p", "eval-status", "evaluating…"));
  } else if (view.phase === "failed") {
    panel.appendChild(
      el("p", "eval-status failed", view.message ?? "evaluation failed"),
    );
  } else if (view.phase === "ready" && view.report) {
    const r = view.report as { mean_rank?: number; mrr?: number };
    panel.appendChild(
      el(
        "p",
        "eval-report",
        `MR ${Number(r.mean_rank).toFixed(1)}  MRR ${Number(r.mrr).toFixed(3)}`,
      ),
    );
  }
  return panel;
}

export function renderExplorer(
  store: ExplorerStore,
  handlers: ViewHandlers,
): HTMLElement {
  const root = el("section", "explorer");
  if (store.error !== null) {
    root.appendChild(renderError(store.error));
  }
  if (store.goal !== null) {
    root.appendChild(renderGoal(store.goal, handlers));
  }
  const page = store.currentPage ?? store.lastPage;
  if (page !== null) {
    root.appendChild(renderBranches(page, store.branch, handlers));
  }
  root.appendChild(renderOptions(store, handlers));
  root.appendChild(renderEvaluation(store, handlers));
  return root;
}
