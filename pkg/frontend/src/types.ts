export type Point = [number, number];

export interface PageSummary {
  id: string;
  width: number;
  height: number;
  has_binary: boolean;
  has_regions: boolean;
  has_lines: boolean;
  has_gt: boolean;
  revision: string;
}

export interface ConnectedComponent {
  id: number;
  bbox: [number, number, number, number];
}

export interface KeyboardLayout {
  name: string;
  rows: string[][];
}

export interface JobStatus {
  job_id: string;
  done: boolean;
  [key: string]: unknown;
}

export interface PageXml {
  xml: string;
  revision: string;
}
