/**
 * The review console. One class owns the DOM below its root element
 * and talks to the service through `api.ts`; nothing here is
 * authoritative, so every action refetches what it changed and a page
 * reload loses only unsent form text.
 */

import {
  ApiError,
  approveCaption,
  exportUrl,
  fetchCaption,
  fetchQueue,
  fetchStats,
  submitEdit,
} from "./api.js";
import { badgeFor, REVIEW_NEEDED_BADGE } from "./badges.js";
import { isolateLatinRuns, splitDiacritics } from "./rtl.js";
import { BUDGETS, CATEGORIES } from "./types.js";
import type {
  Budget,
  CaptionDetail,
  QueueResponse,
  ReviewTask,
  Stats,
} from "./types.js";

export interface AppOptions {
  /** Stats refresh period; 0 turns polling off. */
  statsPollMs?: number;
  annotator?: string;
}

type Attrs = Record<string, string | boolean>;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Attrs = {},
  ...children: Array<Node | string>
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (typeof value === "boolean") {
      if (value) {
        node.setAttribute(key, "");
      }
    } else {
      node.setAttribute(key, value);
    }
  }
  node.append(...children);
  return node;
}

/** RTL display block with Latin runs isolated and marks highlighted. */
function arabicBlock(text: string, className = "arabic"): HTMLElement {
  const block = el("div", { dir: "rtl", class: className });
  for (const segment of splitDiacritics(isolateLatinRuns(text))) {
    if (segment.diacritic) {
      block.append(el("mark", { class: "tashkeel" }, segment.text));
    } else {
      block.append(segment.text);
    }
  }
  return block;
}

function badgeRow(task: ReviewTask): HTMLElement {
  const row = el("div", { class: "badges" });
  for (const flag of task.flags) {
    const style = badgeFor(flag);
    row.append(
      el(
        "span",
        { class: "badge", "data-flag": flag, style: `background:${style.color}` },
        style.label,
      ),
    );
  }
  if (task.judge_parse_error) {
    row.append(
      el(
        "span",
        {
          class: "badge badge-review",
          "data-flag": "judge_parse_error",
          style: `background:${REVIEW_NEEDED_BADGE.color}`,
        },
        REVIEW_NEEDED_BADGE.label,
      ),
    );
  }
  return row;
}

export class ReviewApp {
  readonly root: HTMLElement;
  budget: Budget = "few";
  queue: QueueResponse | null = null;
  detail: CaptionDetail | null = null;
  annotator: string;

  private readonly drafts = new Map<string, string>();
  private readonly pollMs: number;
  private pollHandle: ReturnType<typeof setInterval> | null = null;
  private inflight: Promise<void> = Promise.resolve();

  constructor(root: HTMLElement, options: AppOptions = {}) {
    this.root = root;
    this.pollMs = options.statsPollMs ?? 15000;
    this.annotator = options.annotator ?? "reviewer";
    this.buildSkeleton();
  }

  /** Wait for every queued user action to finish rendering. */
  settle(): Promise<void> {
    return this.inflight;
  }

  private run(action: () => Promise<void>): Promise<void> {
    // User actions are serialized; a failure renders an error and the
    // chain stays usable.
    this.inflight = this.inflight.then(action).catch((error) => {
      this.showBanner(`unexpected failure: ${String(error)}`);
    });
    return this.inflight;
  }

  // -- static skeleton ---------------------------------------------------

  private buildSkeleton(): void {
    const budgetSelect = el("select", { id: "budget" });
    for (const budget of BUDGETS) {
      budgetSelect.append(el("option", { value: budget }, budget));
    }
    budgetSelect.value = this.budget;
    budgetSelect.addEventListener("change", () => {
      void this.setBudget(budgetSelect.value as Budget);
    });

    this.root.append(
      el(
        "header",
        { class: "topbar" },
        el("h1", {}, "Caption review"),
        el("label", { for: "budget" }, "budget"),
        budgetSelect,
        el("span", { id: "queue-count" }),
        el(
          "a",
          { id: "export-link", href: exportUrl(this.budget), download: "corpus.txt" },
          "download corpus",
        ),
        el("span", { id: "banner", class: "banner", hidden: true }),
      ),
      el(
        "main",
        { class: "layout" },
        el("aside", { id: "queue" }, el("ul", { id: "task-list" })),
        el("section", { id: "detail" }),
      ),
      el("footer", { id: "stats-panel" }),
      el(
        "div",
        { id: "conflict", class: "overlay", hidden: true },
        el(
          "div",
          { class: "dialog", role: "alertdialog", "aria-label": "version conflict" },
          el("h2", {}, "Someone else changed this caption"),
          el("p", { id: "conflict-message" }),
          el("p", {}, "Your text is still in the editor and was not sent."),
          el("button", { id: "conflict-reload" }, "Reload task"),
          el("button", { id: "conflict-dismiss" }, "Keep editing"),
        ),
      ),
    );
    this.find("#conflict-reload").addEventListener("click", () => {
      void this.reloadTask();
    });
    this.find("#conflict-dismiss").addEventListener("click", () => {
      this.hideConflict();
    });
  }

  find<T extends HTMLElement = HTMLElement>(selector: string): T {
    const node = this.root.querySelector<T>(selector);
    if (!node) {
      throw new Error(`missing element: ${selector}`);
    }
    return node;
  }

  // -- data flows --------------------------------------------------------

  init(): Promise<void> {
    if (this.pollMs > 0 && this.pollHandle === null) {
      this.pollHandle = setInterval(() => {
        void this.run(() => this.loadStats());
      }, this.pollMs);
    }
    return this.run(async () => {
      await this.loadQueue();
      await this.loadStats();
      const first = this.firstOpen();
      if (first) {
        await this.loadDetail(first.caption_id);
      }
    });
  }

  dispose(): void {
    if (this.pollHandle !== null) {
      clearInterval(this.pollHandle);
      this.pollHandle = null;
    }
  }

  setBudget(budget: Budget): Promise<void> {
    return this.run(async () => {
      this.budget = budget;
      this.find<HTMLAnchorElement>("#export-link").setAttribute(
        "href",
        exportUrl(budget),
      );
      await this.loadQueue();
      const stillListed =
        this.detail &&
        this.queue?.tasks.some((t) => t.caption_id === this.detail?.caption_id);
      if (!stillListed) {
        this.detail = null;
        this.renderDetail();
      }
    });
  }

  refresh(): Promise<void> {
    return this.run(async () => {
      await this.loadQueue();
      await this.loadStats();
    });
  }

  selectTask(captionId: string): Promise<void> {
    return this.run(() => this.loadDetail(captionId));
  }

  applySuggestedFix(): Promise<void> {
    return this.run(async () => {
      const detail = this.detail;
      if (!detail || !detail.suggested_fix) {
        return;
      }
      this.setDraft(detail.caption_id, detail.suggested_fix);
      await this.postEdit(detail.suggested_fix, detail.flags);
    });
  }

  saveEdit(): Promise<void> {
    return this.run(async () => {
      const detail = this.detail;
      if (!detail) {
        return;
      }
      const after = this.find<HTMLTextAreaElement>("#edit-text").value;
      const categories = Array.from(
        this.root.querySelectorAll<HTMLInputElement>("input[data-category]:checked"),
        (box) => box.dataset.category as string,
      );
      this.setDraft(detail.caption_id, after);
      await this.postEdit(after, categories);
    });
  }

  approveTask(): Promise<void> {
    return this.run(async () => {
      const detail = this.detail;
      if (!detail) {
        return;
      }
      try {
        await approveCaption(detail.caption_id, {
          annotator_id: this.readAnnotator(),
          version: detail.version,
        });
      } catch (error) {
        this.renderFailure(error);
        return;
      }
      this.drafts.delete(detail.caption_id);
      await this.afterWrite();
    });
  }

  skipTask(): Promise<void> {
    return this.run(async () => {
      const next = this.nextOpenAfter(this.detail?.caption_id);
      if (next) {
        await this.loadDetail(next.caption_id);
      }
    });
  }

  reloadTask(): Promise<void> {
    return this.run(async () => {
      this.hideConflict();
      if (this.detail) {
        // The draft survives the reload; only version and server text
        // move forward.
        await this.loadDetail(this.detail.caption_id);
      }
      await this.loadQueue();
    });
  }

  private async postEdit(after: string, categories: string[]): Promise<void> {
    const detail = this.detail;
    if (!detail) {
      return;
    }
    try {
      await submitEdit(detail.caption_id, {
        after,
        categories,
        annotator_id: this.readAnnotator(),
        version: detail.version,
      });
    } catch (error) {
      this.renderFailure(error);
      return;
    }
    this.drafts.delete(detail.caption_id);
    await this.afterWrite();
  }

  private async afterWrite(): Promise<void> {
    this.hideBanner();
    this.setFormError("");
    await this.loadQueue();
    await this.loadStats();
    const next = this.firstOpen();
    if (next) {
      await this.loadDetail(next.caption_id);
    } else {
      this.detail = null;
      this.renderDetail();
    }
  }

  private renderFailure(error: unknown): void {
    if (!(error instanceof ApiError)) {
      throw error;
    }
    if (error.status === 409) {
      this.showConflict(error);
    } else if (error.status === 0) {
      this.showBanner(`${error.message} - your text is kept, retry when back`);
    } else {
      this.setFormError(error.message);
    }
  }

  private async loadQueue(): Promise<void> {
    this.queue = await fetchQueue(this.budget);
    this.hideBanner();
    this.renderQueue();
  }

  private async loadStats(): Promise<void> {
    this.renderStats(await fetchStats());
  }

  private async loadDetail(captionId: string): Promise<void> {
    this.detail = await fetchCaption(captionId);
    this.renderDetail();
  }

  // -- selection helpers -------------------------------------------------

  private firstOpen(): ReviewTask | undefined {
    return this.queue?.tasks.find((t) => t.state === "open");
  }

  private nextOpenAfter(captionId: string | undefined): ReviewTask | undefined {
    const tasks = this.queue?.tasks ?? [];
    const open = tasks.filter((t) => t.state === "open");
    if (open.length === 0) {
      return undefined;
    }
    if (!captionId) {
      return open[0];
    }
    const index = open.findIndex((t) => t.caption_id === captionId);
    return open[(index + 1) % open.length];
  }

  private setDraft(captionId: string, text: string): void {
    this.drafts.set(captionId, text);
  }

  private readAnnotator(): string {
    const field = this.root.querySelector<HTMLInputElement>("#annotator");
    if (field && field.value.trim()) {
      this.annotator = field.value.trim();
    }
    return this.annotator;
  }

  // -- rendering ---------------------------------------------------------

  private renderQueue(): void {
    const queue = this.queue;
    const list = this.find("#task-list");
    list.replaceChildren();
    if (!queue) {
      return;
    }
    this.find("#queue-count").textContent =
      `${queue.open} open / ${queue.done} done`;
    for (const task of queue.tasks) {
      const item = el(
        "li",
        {
          class: task.state === "open" ? "task open" : "task done",
          "data-caption-id": task.caption_id,
        },
        el("span", { class: "task-id" }, task.caption_id),
        el("span", { class: "task-state" }, task.state),
        badgeRow(task),
      );
      item.addEventListener("click", () => {
        void this.selectTask(task.caption_id);
      });
      if (task.caption_id === this.detail?.caption_id) {
        item.classList.add("selected");
      }
      list.append(item);
    }
    if (queue.tasks.length === 0) {
      list.append(el("li", { class: "empty" }, "queue is empty"));
    }
  }

  private renderStats(stats: Stats): void {
    const flagged = Object.entries(stats.flag_counts)
      .filter(([, count]) => count > 0)
      .map(([flag, count]) => `${flag} ${count}`)
      .join(", ");
    const status = Object.entries(stats.by_status)
      .map(([name, count]) => `${name} ${count}`)
      .join(", ");
    this.find("#stats-panel").replaceChildren(
      el("span", { id: "stat-captions" }, `${stats.captions} captions`),
      el("span", { id: "stat-status" }, status),
      el("span", { id: "stat-flags" }, flagged || "no flags"),
      el("span", { id: "stat-edits" }, `${stats.history_events} edits`),
      el(
        "span",
        { id: "stat-open" },
        `open: few ${stats.open_tasks.few ?? 0} / full ${stats.open_tasks.full ?? 0}`,
      ),
    );
  }

  private renderDetail(): void {
    const pane = this.find("#detail");
    pane.replaceChildren();
    const detail = this.detail;
    if (!detail) {
      pane.append(el("p", { class: "empty" }, "select a task from the queue"));
      this.renderQueue();
      return;
    }

    const draft = this.drafts.get(detail.caption_id);
    const editValue = draft ?? detail.current_text ?? detail.raw_translation ?? "";

    const textarea = el("textarea", {
      id: "edit-text",
      dir: "rtl",
      rows: "4",
    }) as HTMLTextAreaElement;
    textarea.value = editValue;
    textarea.addEventListener("input", () => {
      this.setDraft(detail.caption_id, textarea.value);
    });

    const categories = el("fieldset", { id: "categories" });
    categories.append(el("legend", {}, "error categories"));
    for (const category of CATEGORIES) {
      const box = el("input", {
        type: "checkbox",
        id: `cat-${category}`,
        "data-category": category,
      }) as HTMLInputElement;
      box.checked = detail.flags.includes(category);
      categories.append(
        el("label", { for: `cat-${category}` }, box, ` ${category}`),
      );
    }

    const annotator = el("input", {
      id: "annotator",
      value: this.annotator,
    }) as HTMLInputElement;

    const save = el("button", { id: "save-edit" }, "Save edit");
    save.addEventListener("click", () => {
      void this.saveEdit();
    });
    const approveButton = el("button", { id: "approve" }, "Approve");
    approveButton.addEventListener("click", () => {
      void this.approveTask();
    });
    const skip = el("button", { id: "skip" }, "Skip");
    skip.addEventListener("click", () => {
      void this.skipTask();
    });

    pane.append(
      el(
        "h2",
        {},
        el("span", { class: "task-id" }, detail.caption_id),
        el("span", { class: "meta" }, ` ${detail.split} / ${detail.status}`),
      ),
      badgeRow(detail),
      el("h3", {}, "source"),
      el("p", { id: "source-text", dir: "ltr" }, detail.source_text),
      el("h3", {}, "machine translation"),
      detail.raw_translation
        ? arabicBlock(detail.raw_translation)
        : el("p", { class: "empty" }, "not translated yet"),
    );
    if (detail.current_text && detail.current_text !== detail.raw_translation) {
      pane.append(
        el("h3", {}, "current text"),
        arabicBlock(detail.current_text, "arabic current"),
      );
    }
    if (detail.suggested_fix && detail.state === "open") {
      const apply = el("button", { id: "apply-fix" }, "Apply suggested fix");
      apply.addEventListener("click", () => {
        void this.applySuggestedFix();
      });
      pane.append(
        el(
          "div",
          { id: "suggested-fix" },
          el("h3", {}, "suggested fix"),
          arabicBlock(detail.suggested_fix, "arabic fix"),
          apply,
        ),
      );
    }
    pane.append(
      el(
        "form",
        { id: "edit-form" },
        el("label", { for: "annotator" }, "annotator"),
        annotator,
        categories,
        el("label", { for: "edit-text" }, "corrected caption"),
        textarea,
        el("p", { id: "form-error", class: "error" }),
        el("div", { class: "actions" }, save, approveButton, skip),
      ),
      el(
        "p",
        { id: "history-note", class: "meta" },
        `${detail.history.length} history event(s), version ${detail.version}`,
      ),
    );
    this.find<HTMLFormElement>("#edit-form").addEventListener("submit", (ev) => {
      ev.preventDefault();
    });
    this.renderQueue();
  }

  // -- notices -----------------------------------------------------------

  private setFormError(message: string): void {
    const node = this.root.querySelector("#form-error");
    if (node) {
      node.textContent = message;
    } else if (message) {
      this.showBanner(message);
    }
  }

  private showBanner(message: string): void {
    const banner = this.find("#banner");
    banner.textContent = message;
    banner.removeAttribute("hidden");
  }

  private hideBanner(): void {
    const banner = this.find("#banner");
    banner.textContent = "";
    banner.setAttribute("hidden", "");
  }

  private showConflict(error: ApiError): void {
    const overlay = this.find("#conflict");
    this.find("#conflict-message").textContent =
      error.currentVersion === null
        ? error.message
        : `${error.message} (server is at version ${error.currentVersion})`;
    overlay.removeAttribute("hidden");
  }

  private hideConflict(): void {
    this.find("#conflict").setAttribute("hidden", "");
  }

  get conflictVisible(): boolean {
    return !this.find("#conflict").hasAttribute("hidden");
  }
}

export function createApp(root: HTMLElement, options: AppOptions = {}): ReviewApp {
  return new ReviewApp(root, options);
}
