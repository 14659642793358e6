/** Explorer state: the single source of truth the view renders from.
 *
 * Pages fetched for the current (step, branch, goal) context are cached by
 * page number, so navigating back re-renders from the cache instead of
 * refetching. Any change to step, branch, or goal invalidates the cache
 * and resets the page to 0.
 */

import type {
  Branch,
  ConceptRef,
  CurrentStep,
  OptionsPage,
} from "./api.js";

export interface EvaluationView {
  phase: "idle" | "pending" | "ready" | "failed";
  jobId?: string;
  report?: Record<string, unknown>;
  message?: string;
}

export class ExplorerStore {
  step: CurrentStep | null = null;
  branch: Branch = "job";
  goal: ConceptRef | null = null;
  page = 0;
  /** Last successfully fetched page; survives errors so the view never
   * blanks out. */
  lastPage: OptionsPage | null = null;
  error: string | null = null;
  evaluation: EvaluationView = { phase: "idle" };

  private pages = new Map<number, OptionsPage>();

  /** The cached page for the current page number, if any. */
  get currentPage(): OptionsPage | null {
    return this.pages.get(this.page) ?? null;
  }

  setStep(step: CurrentStep): void {
    this.step = step;
    this.resetPages();
  }

  setBranch(branch: Branch): void {
    if (branch === this.branch) {
      return;
    }
    this.branch = branch;
    // A goal names a concept in the branch's target domain; it cannot
    // survive a switch to the other domain.
    this.goal = null;
    this.resetPages();
  }

  setGoal(goal: ConceptRef): void {
    this.goal = goal;
    this.resetPages();
  }

  clearGoal(): void {
    if (this.goal === null) {
      return;
    }
    this.goal = null;
    this.resetPages();
  }

  cached(page: number): OptionsPage | undefined {
    return this.pages.get(page);
  }

  storePage(page: OptionsPage): void {
    this.pages.set(page.page, page);
    this.lastPage = page;
    this.error = null;
  }

  private resetPages(): void {
    this.page = 0;
    this.pages.clear();
  }
}
