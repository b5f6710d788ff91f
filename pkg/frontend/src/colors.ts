/** Fixed method color mapping; the single source for marker colors. */

export const METHOD_COLORS: Record<string, string> = {
  zscore: "#4878d0",
  mad: "#ee854a",
  iqr: "#6acc64",
  iforest: "#d65f5f",
  gbt_residual: "#956cb4",
  excess_performance: "#8c613c",
  bayes_hier: "#dc7ec0",
  copula: "#797979",
};

export const FALLBACK_COLOR = "#2f2f2f";

export function methodColor(methodId: string): string {
  return METHOD_COLORS[methodId] ?? FALLBACK_COLOR;
}
