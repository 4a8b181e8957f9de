#!/usr/bin/env node
import { existsSync, mkdirSync } from "fs";
import { CsvError } from "./csv.js";
import { renderAll } from "./render.js";

export function main(argv: string[]): number {
  if (argv.length !== 2) {
    console.error("usage: render_figures <artifact_dir> <out_dir>");
    return 2;
  }
  const [artifactDir, outDir] = argv;
  if (!existsSync(artifactDir)) {
    console.error(`error: artifact directory ${artifactDir} does not exist`);
    return 2;
  }
  mkdirSync(outDir, { recursive: true });
  try {
    const results = renderAll(artifactDir, outDir);
    for (const result of results) {
      console.log(`wrote ${result.output}`);
    }
    return 0;
  } catch (error) {
    if (error instanceof CsvError) {
      console.error(`error: ${error.message}`);
      return 1;
    }
    throw error;
  }
}

import { pathToFileURL } from "url";

if (process.argv[1] !== undefined && import.meta.url === pathToFileURL(process.argv[1]).href) {
  process.exit(main(process.argv.slice(2)));
}
