/** Explorer controller: wires the API client, the state store, and the
 * view together inside a caller-provided container element.
 *
 * Responses are applied only if no newer request has started since
 * (the client also aborts the older transport-level request), so the
 * rendered page always belongs to the latest user action.
 */

import {
  ApiClient,
  ApiError,
  isAbortError,
  type Branch,
  type ConceptRef,
  type CurrentStep,
  type EvaluationJob,
  type FetchLike,
  type OptionsRequest,
} from "./api.js";
import { ExplorerStore } from "./state.js";
import { renderExplorer, type ViewHandlers } from "./view.js";

export interface ExplorerConfig {
  /** Base URL of the prediction service, e.g. "http://127.0.0.1:8000". */
  baseUrl: string;
}

const BRANCH_TARGET: Record<Branch, "diploma" | "job"> = {
  further_studies: "diploma",
  job: "job",
};

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export class Explorer {
  readonly store = new ExplorerStore();
  private readonly api: ApiClient;
  private epoch = 0;
  private readonly handlers: ViewHandlers = {
    selectGoal: (concept) => void this.selectGoal(concept),
    clearGoal: () => void this.clearGoal(),
    nextPage: () => void this.nextPage(),
    prevPage: () => void this.prevPage(),
    chooseBranch: (branch) => void this.setBranch(branch),
    runEvaluation: () => void this.runEvaluation(),
  };

  constructor(
    private readonly container: HTMLElement,
    config: ExplorerConfig,
    fetchImpl?: FetchLike,
  ) {
    this.api = new ApiClient(config.baseUrl, fetchImpl);
    this.render();
  }

  async setStep(step: CurrentStep): Promise<void> {
    this.store.setStep(step);
    await this.loadCurrentPage();
  }

  async setBranch(branch: Branch): Promise<void> {
    this.store.setBranch(branch);
    await this.loadCurrentPage();
  }

  async selectGoal(concept: ConceptRef): Promise<void> {
    this.store.setGoal(concept);
    await this.loadCurrentPage();
  }

  async clearGoal(): Promise<void> {
    this.store.clearGoal();
    await this.loadCurrentPage();
  }

  async nextPage(): Promise<void> {
    const page = this.store.currentPage;
    if (page === null || !page.more_available) {
      return;
    }
    this.store.page += 1;
    await this.loadCurrentPage();
  }

  /** Step back one page; always served from the cache, never refetched. */
  async prevPage(): Promise<void> {
    if (this.store.page === 0) {
      return;
    }
    this.store.page -= 1;
    this.store.error = null;
    this.render();
  }

  async runEvaluation(): Promise<void> {
    const { store } = this;
    store.evaluation = { phase: "pending" };
    this.render();
    try {
      const submitted = await this.api.submitEvaluation({
        target_kind: BRANCH_TARGET[store.branch],
        method: "previous",
      });
      const job = await this.pollUntilSettled(submitted.job_id);
      store.evaluation =
        job.status === "done"
          ? { phase: "ready", jobId: job.job_id, report: job.report }
          : {
              phase: "failed",
              jobId: job.job_id,
              message: job.error_message ?? "evaluation failed",
            };
    } catch (err) {
      store.evaluation = { phase: "failed", message: describe(err) };
    }
    this.render();
  }

  private async pollUntilSettled(
    jobId: string,
    delayMs = 50,
    maxPolls = 200,
  ): Promise<EvaluationJob> {
    for (let attempt = 0; attempt < maxPolls; attempt += 1) {
      const job = await this.api.evaluationJob(jobId);
      if (job.status === "done" || job.status === "failed") {
        return job;
      }
      await sleep(delayMs);
    }
    throw new Error(`evaluation job ${jobId} did not settle`);
  }

  private async loadCurrentPage(): Promise<void> {
    const { store } = this;
    this.epoch += 1;
    const epoch = this.epoch;
    if (store.step === null) {
      this.render();
      return;
    }
    if (store.cached(store.page) !== undefined) {
      store.error = null;
      this.render();
      return;
    }
    const body: OptionsRequest = {
      current_step: store.step,
      branch: store.branch,
      page: store.page,
    };
    if (store.goal !== null) {
      body.goal = { domain: store.goal.domain, index: store.goal.index };
    }
    try {
      const page = await this.api.options(body);
      if (epoch !== this.epoch) {
        return; // superseded by a newer action
      }
      store.storePage(page);
    } catch (err) {
      if (epoch !== this.epoch || isAbortError(err)) {
        return;
      }
      store.error = describe(err);
    }
    this.render();
  }

  private render(): void {
    this.container.replaceChildren(renderExplorer(this.store, this.handlers));
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) {
    return `${err.code}: ${err.message}`;
  }
  return err instanceof Error ? err.message : String(err);
}

export function createExplorer(
  container: HTMLElement,
  config: ExplorerConfig,
  fetchImpl?: FetchLike,
): Explorer {
  return new Explorer(container, config, fetchImpl);
}
