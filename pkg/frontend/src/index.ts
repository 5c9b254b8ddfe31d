import { readFile, writeFile } from "node:fs/promises";

import { run, runJson } from "./run.js";
import type {
  ClassifyOptions,
  ClassifyReport,
  ConvertFormat,
  ConvertReport,
  Evidence,
  FitReport,
  GenerateOptions,
  GenerateReport,
  HellingerReport,
  InferOptions,
  InferResult,
  LearnParamsOptions,
  LearnStructureOptions,
  NetworkJson,
  ShdReport,
  StructureReport,
} from "./types.js";

export { PgmkitError, pgmkitBinary, run } from "./run.js";
export * from "./types.js";

function pushFlag(args: string[], flag: string, value: number | string | undefined): void {
  if (value !== undefined) args.push(flag, String(value));
}

function evidenceArg(evidence: Evidence): string {
  return Object.entries(evidence)
    .map(([variable, state]) => `${variable}=${state}`)
    .join(",");
}

/** CLI version string. */
export async function version(): Promise<string> {
  const { stdout } = await run(["--version"]);
  return stdout.trim();
}

/** Posterior marginals for a BIF or network-JSON model given evidence. */
export function infer(model: string, opts: InferOptions = {}): Promise<InferResult> {
  const args = ["infer", "--model", model];
  pushFlag(args, "--engine", opts.engine);
  if (opts.evidence && Object.keys(opts.evidence).length > 0) {
    args.push("--evidence", evidenceArg(opts.evidence));
  }
  if (opts.query && opts.query.length > 0) {
    args.push("--query", opts.query.join(","));
  }
  pushFlag(args, "--n", opts.nSamples);
  pushFlag(args, "--seed", opts.seed);
  pushFlag(args, "--update-interval", opts.updateInterval);
  pushFlag(args, "--epsilon-cutoff", opts.epsilonCutoff);
  pushFlag(args, "--lbp-iters", opts.lbpIters);
  pushFlag(args, "--lbp-tol", opts.lbpTol);
  pushFlag(args, "--workers", opts.workers);
  return runJson<InferResult>(args);
}

/** PC-stable CPDAG discovery from a CSV dataset. Writes
 * `${out}.cpdag.json` and `${out}.dag.bif-structure.json`. */
export function learnStructure(
  data: string,
  out: string,
  opts: LearnStructureOptions = {},
): Promise<StructureReport> {
  const args = ["learn-structure", "--data", data, "--out", out];
  pushFlag(args, "--alpha", opts.alpha);
  pushFlag(args, "--depth", opts.depth);
  pushFlag(args, "--workers", opts.workers);
  return runJson<StructureReport>(args);
}

/** Fit CPTs for a fixed structure (JSON or BIF) and write a BIF model. */
export function learnParams(
  data: string,
  structure: string,
  out: string,
  opts: LearnParamsOptions = {},
): Promise<FitReport> {
  const args = ["learn-params", "--data", data, "--structure", structure, "--out", out];
  pushFlag(args, "--pseudocount", opts.pseudocount);
  pushFlag(args, "--workers", opts.workers);
  return runJson<FitReport>(args);
}

/** Forward-sample a CSV dataset from a model. */
export function generate(
  model: string,
  n: number,
  out: string,
  opts: GenerateOptions = {},
): Promise<GenerateReport> {
  const args = ["generate", "--model", model, "--n", String(n), "--out", out];
  pushFlag(args, "--seed", opts.seed);
  pushFlag(args, "--workers", opts.workers);
  return runJson<GenerateReport>(args);
}

/** Structural Hamming distance between two graph files (BIF, network or
 * structure JSON, or CPDAG JSON). */
export function shd(learned: string, truth: string): Promise<ShdReport> {
  return runJson<ShdReport>(["eval", "shd", "--learned", learned, "--truth", truth]);
}

/** Mean Hellinger distance between two marginals documents. */
export function hellinger(a: string, b: string): Promise<HellingerReport> {
  return runJson<HellingerReport>(["eval", "hellinger", "--a", a, "--b", b]);
}

/** Rewrite a model file as BIF, DOT, or network JSON. */
export function convert(input: string, to: ConvertFormat, out: string): Promise<ConvertReport> {
  return runJson<ConvertReport>(["convert", "--in", input, "--to", to, "--out", out]);
}

/** Predict a class variable for every row of a dataset and report accuracy. */
export function classify(
  model: string,
  data: string,
  classVar: string,
  opts: ClassifyOptions = {},
): Promise<ClassifyReport> {
  const args = ["classify", "--model", model, "--data", data, "--class-var", classVar];
  pushFlag(args, "--engine", opts.engine);
  pushFlag(args, "--n", opts.nSamples);
  pushFlag(args, "--seed", opts.seed);
  pushFlag(args, "--workers", opts.workers);
  return runJson<ClassifyReport>(args);
}

/** Read a network JSON document from disk. */
export async function loadNetwork(path: string): Promise<NetworkJson> {
  const doc = JSON.parse(await readFile(path, "utf8")) as Partial<NetworkJson>;
  if (doc === null || doc.format !== "pgmkit-network") {
    throw new Error(`${path} is not a pgmkit network document`);
  }
  return doc as NetworkJson;
}

/** Write a network JSON document to disk. */
export async function saveNetwork(path: string, network: NetworkJson): Promise<void> {
  await writeFile(path, JSON.stringify(network, null, 2) + "\n", "utf8");
}
