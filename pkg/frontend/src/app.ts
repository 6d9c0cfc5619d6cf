/**
 * Minimal single-page wiring: login, role-driven navigation, study table
 * with search/pagination, and the passport generation page. All state lives
 * in this module; views are re-rendered wholesale on change.
 */

import { ApiClient, ApiError, EntityEnvelope } from "./api.js";
import { SECTION_KINDS, SECTION_TITLES, SectionKind, LOCKED_SECTION } from "./constants.js";
import { SessionState, pagesFor, formatShowing } from "./session.js";
import { PassportWorkflow } from "./workflow.js";

interface RuntimeConfig {
  apiBaseUrl: string;
}

async function loadConfig(): Promise<RuntimeConfig> {
  const r = await fetch("./config.json");
  return (await r.json()) as RuntimeConfig;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  text?: string,
  className?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (text !== undefined) {
    node.textContent = text;
  }
  if (className !== undefined) {
    node.className = className;
  }
  return node;
}

export class ConsoleApp {
  private session: SessionState | null = null;
  private root: HTMLElement;

  constructor(private client: ApiClient, rootId = "app") {
    const root = document.getElementById(rootId);
    if (root === null) {
      throw new Error(`missing #${rootId} container`);
    }
    this.root = root;
  }

  start(): void {
    this.renderLogin();
  }

  private clear(): void {
    this.root.replaceChildren();
  }

  private renderError(message: string): void {
    const banner = el("div", message, "error-banner");
    this.root.prepend(banner);
  }

  private renderLogin(error = ""): void {
    this.clear();
    const form = el("form", undefined, "login-form");
    const user = el("input");
    user.name = "username";
    const pass = el("input");
    pass.name = "password";
    pass.type = "password";
    const submit = el("button", "Sign in");
    form.append(el("label", "Username"), user, el("label", "Password"), pass, submit);
    if (error !== "") {
      form.append(el("div", error, "error-banner"));
    }
    form.addEventListener("submit", async (ev) => {
      ev.preventDefault();
      try {
        const login = await this.client.login(user.value, pass.value);
        this.session = {
          token: login.token,
          subject: login.subject,
          assignments: login.assignments,
          activeStudyId: "",
        };
        this.renderShell();
      } catch (err) {
        this.renderLogin(err instanceof ApiError ? err.message : "login failed");
      }
    });
    this.root.append(el("h1", "AI Product Passport Console"), form);
  }

  private renderShell(activePage?: string): void {
    if (this.session === null) {
      this.renderLogin();
      return;
    }
    this.clear();
    const pages = pagesFor(this.session);
    const nav = el("nav");
    for (const page of pages) {
      const link = el("a", page, page === activePage ? "active" : "");
      link.href = "#";
      link.addEventListener("click", (ev) => {
        ev.preventDefault();
        this.openPage(page);
      });
      nav.append(link);
    }
    this.root.append(el("header", `Signed in as ${this.session.subject}`), nav);
    const main = el("main");
    main.id = "page";
    this.root.append(main);
    if (activePage !== undefined) {
      void this.renderPage(main, activePage);
    }
  }

  private openPage(page: string): void {
    if (this.session === null || !pagesFor(this.session).includes(page)) {
      // guard mirrors the server-side permission matrix
      this.clear();
      this.root.append(el("h1", "Access denied"));
      return;
    }
    this.renderShell(page);
  }

  private async renderPage(main: HTMLElement, page: string): Promise<void> {
    main.replaceChildren(el("h1", page));
    try {
      if (page === "Study Selection" || page === "Study Management") {
        await this.renderStudyTable(main);
      } else if (page === "Passport Management") {
        await this.renderPassportPage(main);
      } else {
        main.append(el("p", "Select a study to begin."));
      }
    } catch (err) {
      this.renderError(err instanceof ApiError ? err.message : String(err));
    }
  }

  private async renderStudyTable(main: HTMLElement, page = 1, search = ""): Promise<void> {
    const pageSize = 10;
    const result = await this.client.listStudies(page, pageSize, search);
    const searchBox = el("input");
    searchBox.type = "search";
    searchBox.value = search;
    searchBox.addEventListener("change", () => {
      void this.renderStudyTable(main, 1, searchBox.value);
    });

    const table = el("table");
    const head = el("tr");
    for (const column of ["Name", "Description", "Objectives", "Ethics"]) {
      head.append(el("th", column));
    }
    table.append(head);
    for (const study of result.items) {
      const row = el("tr");
      for (const field of ["name", "description", "objectives", "ethics"]) {
        row.append(el("td", String(study.data[field] ?? "")));
      }
      row.addEventListener("click", () => {
        if (this.session !== null) {
          this.session.activeStudyId = study.id;
        }
      });
      table.append(row);
    }
    const footer = el("p", formatShowing(result.page, result.pageSize, result.total));
    main.replaceChildren(el("h1", "Assigned Studies"), searchBox, table, footer);
  }

  private async renderPassportPage(main: HTMLElement): Promise<void> {
    if (this.session === null || this.session.activeStudyId === "") {
      main.append(el("p", "Select a study first."));
      return;
    }
    const deployments = await this.client.listInStudy(
      this.session.activeStudyId,
      "model-deployments",
    );
    const first: EntityEnvelope | undefined = deployments.items[0];
    if (first === undefined) {
      main.append(el("p", "No deployments in this study yet."));
      return;
    }
    const workflow = new PassportWorkflow(this.client, first.id);
    const boxes = el("div", undefined, "section-boxes");
    for (const kind of SECTION_KINDS) {
      const label = el("label", SECTION_TITLES[kind]);
      const box = el("input");
      box.type = "checkbox";
      box.checked = workflow.isSelected(kind);
      box.disabled = kind === LOCKED_SECTION;
      box.addEventListener("change", () => {
        workflow.toggle(kind as SectionKind);
        box.checked = workflow.isSelected(kind);
      });
      label.prepend(box);
      boxes.append(label);
    }
    const compile = el("button", "Compile passport");
    const preview = el("pre");
    const download = el("button", "Download export");
    download.disabled = true;
    compile.addEventListener("click", async () => {
      try {
        await workflow.compile();
        preview.textContent = await workflow.preview();
        download.disabled = false;
      } catch (err) {
        if (err instanceof ApiError && err.status === 409) {
          this.renderError("The passport changed underneath you; recompile to continue.");
        } else {
          this.renderError(err instanceof ApiError ? err.message : String(err));
        }
      }
    });
    download.addEventListener("click", async () => {
      for (const file of await workflow.download()) {
        const blob = new Blob([file.content], { type: file.mediaType });
        const link = el("a");
        link.href = URL.createObjectURL(blob);
        link.download = file.filename;
        link.click();
        URL.revokeObjectURL(link.href);
      }
    });
    main.append(boxes, compile, download, preview);
  }
}

export async function bootstrap(): Promise<void> {
  const config = await loadConfig();
  const app = new ConsoleApp(new ApiClient(config.apiBaseUrl));
  app.start();
}
