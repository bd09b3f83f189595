/**
 * Experiment matrices: expand a grid of configs, run them one after the
 * other (each run owns the process; failures are recorded and the sweep
 * continues), and summarize grouped means/stds.
 */

import { mkdirSync, writeFileSync } from "node:fs";
import { dirname } from "node:path";

import {
  appendLedgerRow,
  ExperimentConfig,
  OptimizerName,
  runExperiment,
} from "./experiment.js";
import { DatasetName } from "./data.js";
import { InitMode } from "./model.js";

export interface SweepSpec {
  datasets: DatasetName[];
  initModes: InitMode[];
  optimizers: OptimizerName[];
  weightDecays: number[];
  seeds: number[];
  epochs: number;
  batchSize: number;
  codebookPath?: string;
  dataDir?: string;
  limitTrain?: number;
  limitTest?: number;
  backend?: "wasm" | "cpu";
  quiet?: boolean;
}

export function expandMatrix(spec: SweepSpec): ExperimentConfig[] {
  const configs: ExperimentConfig[] = [];
  for (const dataset of spec.datasets) {
    for (const initMode of spec.initModes) {
      for (const optimizer of spec.optimizers) {
        for (const weightDecay of spec.weightDecays) {
          for (const seed of spec.seeds) {
            configs.push({
              dataset,
              initMode,
              optimizer,
              weightDecay,
              seed,
              epochs: spec.epochs,
              batchSize: spec.batchSize,
              codebookPath: spec.codebookPath,
              dataDir: spec.dataDir,
              limitTrain: spec.limitTrain,
              limitTest: spec.limitTest,
              backend: spec.backend,
              quiet: spec.quiet,
            });
          }
        }
      }
    }
  }
  return configs;
}

export interface SweepRow {
  config: ExperimentConfig;
  firstEpochAccuracy: number | null;
  finalAccuracy: number | null;
  wallClockSeconds: number;
  error?: string;
}

export interface GroupSummary {
  dataset: string;
  initMode: string;
  optimizer: string;
  weightDecay: number;
  runs: number;
  meanFirstEpoch: number;
  stdFirstEpoch: number;
  meanFinal: number;
}

export async function runSweep(
  configs: ExperimentConfig[],
  ledgerPath: string,
): Promise<SweepRow[]> {
  const rows: SweepRow[] = [];
  for (const config of configs) {
    const started = Date.now();
    try {
      const result = await runExperiment({ ...config, ledgerPath });
      rows.push({
        config,
        firstEpochAccuracy: result.firstEpochAccuracy,
        finalAccuracy: result.finalAccuracy,
        wallClockSeconds: result.wallClockSeconds,
      });
    } catch (err) {
      const message = err instanceof Error ? `${err.name}: ${err.message}` : String(err);
      rows.push({
        config,
        firstEpochAccuracy: null,
        finalAccuracy: null,
        wallClockSeconds: (Date.now() - started) / 1000,
        error: message,
      });
      appendLedgerRow(ledgerPath, [
        config.dataset,
        config.initMode,
        config.optimizer,
        config.weightDecay,
        config.seed,
        config.epochs,
        config.batchSize,
        "",
        "",
        ((Date.now() - started) / 1000).toFixed(2),
        `error(${message.replaceAll(",", ";")})`,
      ]);
      if (!config.quiet) console.error(`run failed, continuing: ${message}`);
    }
  }
  return rows;
}

export function summarize(rows: SweepRow[]): GroupSummary[] {
  const groups = new Map<string, SweepRow[]>();
  for (const row of rows) {
    if (row.firstEpochAccuracy === null) continue;
    const c = row.config;
    const key = `${c.dataset}|${c.initMode}|${c.optimizer}|${c.weightDecay}`;
    groups.set(key, [...(groups.get(key) ?? []), row]);
  }
  const out: GroupSummary[] = [];
  for (const [key, members] of groups) {
    const [dataset, initMode, optimizer, weightDecay] = key.split("|");
    const firsts = members.map((r) => r.firstEpochAccuracy as number);
    const finals = members.map((r) => r.finalAccuracy as number);
    const mean = firsts.reduce((a, b) => a + b, 0) / firsts.length;
    const variance =
      firsts.reduce((a, b) => a + (b - mean) * (b - mean), 0) / firsts.length;
    out.push({
      dataset,
      initMode,
      optimizer,
      weightDecay: Number(weightDecay),
      runs: members.length,
      meanFirstEpoch: mean,
      stdFirstEpoch: Math.sqrt(variance),
      meanFinal: finals.reduce((a, b) => a + b, 0) / finals.length,
    });
  }
  return out;
}

export function writeSummaryCsv(path: string, summary: GroupSummary[]): void {
  mkdirSync(dirname(path) || ".", { recursive: true });
  const lines = [
    "dataset,init_mode,optimizer,weight_decay,runs,mean_first_epoch,std_first_epoch,mean_final",
  ];
  for (const g of summary) {
    lines.push(
      `${g.dataset},${g.initMode},${g.optimizer},${g.weightDecay},${g.runs},` +
        `${g.meanFirstEpoch.toFixed(4)},${g.stdFirstEpoch.toFixed(4)},${g.meanFinal.toFixed(4)}`,
    );
  }
  writeFileSync(path, lines.join("\n") + "\n");
}
