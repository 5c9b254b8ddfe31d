/** Inference engines accepted by `infer` and `classify`. */
export type Engine = "ve" | "jt" | "lbp" | "pls" | "lw" | "sis" | "ais" | "epis";

/** Evidence maps variable names to observed state names. */
export type Evidence = Record<string, string>;

/** Posterior marginals keyed by variable name, then state name. */
export type Marginals = Record<string, Record<string, number>>;

/** Sampler / belief-propagation diagnostics. Keys absent when inapplicable. */
export interface Diagnostics {
  engine: string;
  n_samples?: number;
  acceptance_rate?: number;
  effective_sample_size?: number;
  converged?: boolean;
  iterations?: number;
}

export interface InferResult {
  marginals: Marginals;
  diagnostics?: Diagnostics;
}

export interface InferOptions {
  engine?: Engine;
  evidence?: Evidence;
  /** Variables to report; default is every non-evidence variable. */
  query?: string[];
  nSamples?: number;
  seed?: number;
  updateInterval?: number;
  epsilonCutoff?: number;
  lbpIters?: number;
  lbpTol?: number;
  workers?: number;
}

export interface LearnStructureOptions {
  alpha?: number;
  /** Maximum conditioning-set size; -1 means unlimited. */
  depth?: number;
  workers?: number;
}

export interface StructureReport {
  edges: number;
  ci_tests: number;
  wall_time_s: number;
}

export interface LearnParamsOptions {
  pseudocount?: number;
  workers?: number;
}

export interface FitReport {
  variables: number;
  rows: number;
  out: string;
}

export interface GenerateOptions {
  seed?: number;
  workers?: number;
}

export interface GenerateReport {
  rows: number;
  variables: number;
  out: string;
}

export interface ShdReport {
  shd: number;
}

export interface HellingerReport {
  mean_hellinger: number;
}

export type ConvertFormat = "bif" | "dot" | "json";

export interface ConvertReport {
  out: string;
  format: ConvertFormat;
}

export interface ClassifyOptions {
  engine?: Engine;
  nSamples?: number;
  seed?: number;
  workers?: number;
}

export interface ClassifyReport {
  accuracy: number;
  n_rows: number;
  engine: string;
  class_var: string;
}

export interface NetworkVariable {
  name: string;
  states: string[];
}

/** The network JSON document: one entry per variable, parents by name,
 * CPTs as one row per parent configuration (last declared parent varying
 * fastest). Structure-only documents omit `cpts`. */
export interface NetworkJson {
  format: "pgmkit-network";
  version: number;
  name: string;
  variables: NetworkVariable[];
  parents: string[][];
  cpts?: number[][][];
}

export interface CpdagEdge {
  from: string;
  to: string;
  directed: boolean;
}

/** Partially directed graph written by `learn-structure`. */
export interface CpdagJson {
  format: "pgmkit-cpdag";
  variables: string[];
  edges: CpdagEdge[];
}
