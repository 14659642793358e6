export {
  ApiClient,
  ApiError,
  isAbortError,
  type Branch,
  type BranchShare,
  type ConceptRef,
  type CorpusStats,
  type CurrentStep,
  type Domain,
  type EvaluationJob,
  type EvaluationRequest,
  type FetchLike,
  type OptionsPage,
  type OptionsRequest,
  type RankedConcept,
} from "./api.js";
export { ExplorerStore, type EvaluationView } from "./state.js";
export { renderExplorer, renderOptions, type ViewHandlers } from "./view.js";
export { createExplorer, Explorer, type ExplorerConfig } from "./app.js";
