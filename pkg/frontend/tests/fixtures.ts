import { mkdtempSync, writeFileSync } from "fs";
import { tmpdir } from "os";
import { join } from "path";

/** Write a miniature artifact directory matching the documented schemas. */
export function makeArtifactDir(): string {
  const dir = mkdtempSync(join(tmpdir(), "rteinv-artifacts-"));
  const kns = [0.25, 0.125, 0.0625];

  let fig1 = "index,kn=2^-2,kn=2^-3,kn=2^-4\n";
  for (let i = 1; i <= 25; i++) {
    fig1 += `${i},${Math.exp(-i)},${Math.exp(-1.3 * i)},${Math.exp(-1.7 * i)}\n`;
  }
  writeFileSync(join(dir, "fig1.csv"), fig1);
  writeFileSync(join(dir, "fig5.csv"), fig1);

  let vectors = "kn,x,v1,v2,v3\n";
  for (const kn of kns) {
    for (let i = 0; i <= 20; i++) {
      const x = i / 20;
      vectors += `${kn},${x},${Math.sin(Math.PI * x)},${Math.cos(Math.PI * x)},${x * (1 - x)}\n`;
    }
  }
  writeFileSync(join(dir, "fig2.csv"), vectors);
  writeFileSync(join(dir, "fig6.csv"), vectors);

  let fig3 = "p,i,x,value\n";
  for (let p = 1; p <= 6; p++) {
    for (let i = 1; i <= 15; i++) {
      fig3 += `${p},${i},${(i - 1) / 14},${p * 0.1 + 0.001 * i}\n`;
    }
  }
  writeFileSync(join(dir, "fig3.csv"), fig3);

  let fig4 = "kn,x,ratio,predicted\n";
  for (const kn of kns) {
    for (let i = 2; i <= 18; i++) {
      const x = i / 20;
      fig4 += `${kn},${x},${kn * 0.01 * (1 + 0.05 * Math.sin(x))},${kn * 0.01}\n`;
    }
  }
  writeFileSync(join(dir, "fig4.csv"), fig4);

  return dir;
}
