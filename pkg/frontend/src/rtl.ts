/**
 * Bidirectional text helpers for mixed Arabic/Latin captions.
 *
 * Translation panes render with an RTL base direction; any embedded
 * Latin run is wrapped in an isolate pair so it cannot reorder the
 * Arabic around it. Isolation is display-only: form controls get a
 * `dir` attribute instead, so submitted text never contains control
 * characters.
 */

/** Left-to-Right Isolate. */
export const LRI = "⁦";
/** Pop Directional Isolate, closes the last isolate initiator. */
export const PDI = "⁩";

// Strong RTL blocks that matter for caption text: Arabic, Arabic
// Supplement, Arabic Extended-A, presentation forms, plus Hebrew.
const RTL_RANGES: ReadonlyArray<readonly [number, number]> = [
  [0x0590, 0x05ff],
  [0x0600, 0x06ff],
  [0x0750, 0x077f],
  [0x08a0, 0x08ff],
  [0xfb1d, 0xfdff],
  [0xfe70, 0xfeff],
];

// Harakat, shadda, sukun, superscript alef, and tatweel: the marks the
// pipeline's diacritics flag is about.
const DIACRITIC_RANGES: ReadonlyArray<readonly [number, number]> = [
  [0x064b, 0x0652],
  [0x0653, 0x0655],
  [0x0670, 0x0670],
  [0x0640, 0x0640],
];

function inRanges(
  code: number,
  ranges: ReadonlyArray<readonly [number, number]>,
): boolean {
  for (const [lo, hi] of ranges) {
    if (code >= lo && code <= hi) {
      return true;
    }
  }
  return false;
}

export function isRtlChar(ch: string): boolean {
  const code = ch.codePointAt(0);
  return code !== undefined && inRanges(code, RTL_RANGES);
}

export function isDiacritic(ch: string): boolean {
  const code = ch.codePointAt(0);
  return code !== undefined && inRanges(code, DIACRITIC_RANGES);
}

function isLatinChar(ch: string): boolean {
  return /[A-Za-zÀ-ɏ]/.test(ch);
}

/**
 * Base direction from the first strong directional character, the same
 * rule `dir="auto"` applies.
 */
export function direction(text: string): "rtl" | "ltr" | "neutral" {
  for (const ch of text) {
    if (isRtlChar(ch)) {
      return "rtl";
    }
    if (isLatinChar(ch)) {
      return "ltr";
    }
  }
  return "neutral";
}

export function hasRtl(text: string): boolean {
  for (const ch of text) {
    if (isRtlChar(ch)) {
      return true;
    }
  }
  return false;
}

/**
 * Wrap every maximal Latin run in LRI...PDI for rendering inside an
 * RTL block. Runs include their inner spaces so a multi-word Latin
 * phrase stays in one isolate.
 */
export function isolateLatinRuns(text: string): string {
  let out = "";
  let run = "";
  let pendingSpace = "";
  const flush = () => {
    if (run) {
      out += LRI + run + PDI;
      run = "";
    }
    out += pendingSpace;
    pendingSpace = "";
  };
  for (const ch of text) {
    if (isLatinChar(ch)) {
      run += pendingSpace + ch;
      pendingSpace = "";
    } else if (ch === " " && run) {
      // Only attach the space if another Latin character follows.
      pendingSpace += ch;
    } else {
      flush();
      out += ch;
    }
  }
  flush();
  return out;
}

export interface TextSegment {
  text: string;
  diacritic: boolean;
}

/**
 * Split text into alternating plain/diacritic segments for rendering
 * with the marks visually highlighted. Concatenating the segments
 * restores the input exactly.
 */
export function splitDiacritics(text: string): TextSegment[] {
  const segments: TextSegment[] = [];
  let current = "";
  let marking = false;
  for (const ch of text) {
    const mark = isDiacritic(ch);
    if (current && mark !== marking) {
      segments.push({ text: current, diacritic: marking });
      current = "";
    }
    current += ch;
    marking = mark;
  }
  if (current) {
    segments.push({ text: current, diacritic: marking });
  }
  return segments;
}
