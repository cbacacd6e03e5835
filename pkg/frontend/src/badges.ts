/** Fixed badge palette so a category reads the same everywhere. */

import type { Category } from "./types.js";

export interface BadgeStyle {
  label: string;
  color: string;
}

export const CATEGORY_BADGES: Record<Category, BadgeStyle> = {
  lexical: { label: "lexical", color: "#8e44ad" },
  literal: { label: "literal", color: "#2980b9" },
  hallucination: { label: "hallucination", color: "#c0392b" },
  tense_shift: { label: "tense shift", color: "#d35400" },
  loanword: { label: "loanword", color: "#16a085" },
  diacritics: { label: "diacritics", color: "#7f8c8d" },
};

/** Unreadable judge verdict: not an error category, but always needs
 * human eyes, so it gets its own badge. */
export const REVIEW_NEEDED_BADGE: BadgeStyle = {
  label: "review needed",
  color: "#2c3e50",
};

export function badgeFor(flag: string): BadgeStyle {
  const style = CATEGORY_BADGES[flag as Category];
  return style ?? { label: flag, color: "#555" };
}
