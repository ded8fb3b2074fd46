export { ApiClient, ApiError } from "./api.js";
export { exportLayout, importLayout, KeyboardError, validateLayout } from "./keyboard.js";
export {
  DocumentError,
  formatPoints,
  PAGE_NS,
  PageDocument,
  parsePoints,
} from "./pagedoc.js";
export type { LineView, RegionView } from "./pagedoc.js";
export { TranscriptionSession } from "./transcription.js";
export type { LineRecord, SaveFn } from "./transcription.js";
export { ViewState } from "./viewstate.js";
export type { Transform, View } from "./viewstate.js";
export type * from "./types.js";
