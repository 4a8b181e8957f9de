import { writeFileSync } from "fs";
import { createRequire } from "module";
import { join } from "path";
import { readCsv } from "./csv.js";

// the full CJS build ships every chart type and the SVG renderer
const requireCjs = createRequire(import.meta.url);
const echarts = requireCjs("echarts") as typeof import("echarts");
import { FIGURES, FigureSpec } from "./figures.js";

const WIDTH = 840;
const HEIGHT = 560;

/** Render one figure spec from its CSV into an SVG string. */
export function renderFigure(spec: FigureSpec, artifactDir: string): string {
  const path = join(artifactDir, spec.input);
  const table = readCsv(path);
  const option = spec.build(table, path);
  const chart = echarts.init(null, null, {
    renderer: "svg",
    ssr: true,
    width: WIDTH,
    height: HEIGHT,
  });
  try {
    chart.setOption({ animation: false, ...option });
    return chart.renderToSVGString();
  } finally {
    chart.dispose();
  }
}

export interface RenderResult {
  id: number;
  output: string;
}

/** Render every figure; nothing is written for a figure whose CSV is bad. */
export function renderAll(artifactDir: string, outDir: string): RenderResult[] {
  const results: RenderResult[] = [];
  for (const spec of FIGURES) {
    const svg = renderFigure(spec, artifactDir);
    const output = join(outDir, `fig${spec.id}.svg`);
    writeFileSync(output, svg);
    results.push({ id: spec.id, output });
  }
  return results;
}
