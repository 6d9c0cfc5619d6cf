/**
 * Passport generation workflow: interactive section selection (the model
 * identity section is locked on), compile, preview, and export download.
 */

import type { ApiClient, PassportDocument } from "./api.js";
import { LOCKED_SECTION, SECTION_KINDS, SectionKind } from "./constants.js";

export interface ExportFile {
  filename: string;
  content: string;
  mediaType: string;
}

export class PassportWorkflow {
  private selected: Set<SectionKind>;
  passportId = "";
  version = 0;

  constructor(private client: ApiClient, private deploymentId: string) {
    this.selected = new Set(SECTION_KINDS);
  }

  selection(): SectionKind[] {
    return SECTION_KINDS.filter((k) => this.selected.has(k));
  }

  isSelected(kind: SectionKind): boolean {
    return this.selected.has(kind);
  }

  /** Toggle a checkbox; the locked section cannot be turned off. */
  toggle(kind: SectionKind): void {
    if (kind === LOCKED_SECTION) {
      return;
    }
    if (this.selected.has(kind)) {
      this.selected.delete(kind);
    } else {
      this.selected.add(kind);
    }
  }

  async compile(): Promise<PassportDocument> {
    const ent =
      this.passportId === ""
        ? await this.client.compilePassport(this.deploymentId, this.selection())
        : await this.client.recompilePassport(
            this.passportId,
            this.version,
            this.selection(),
          );
    this.passportId = ent.id;
    this.version = ent.version;
    return (ent.data as { document: PassportDocument }).document;
  }

  async preview(): Promise<string> {
    return this.client.getReport(this.passportId);
  }

  /** Canonical document, detached signature, and the printable report. */
  async download(): Promise<ExportFile[]> {
    const payload = await this.client.getPassportBytes(this.passportId);
    const signature = await this.client.getSignature(this.passportId);
    const report = await this.client.getReport(this.passportId);
    return [
      {
        filename: `${this.passportId}.passport.json`,
        content: payload,
        mediaType: "application/json",
      },
      {
        filename: `${this.passportId}.passport.sig`,
        content: JSON.stringify(signature, null, 2),
        mediaType: "application/json",
      },
      {
        filename: `${this.passportId}.report.md`,
        content: report,
        mediaType: "text/markdown",
      },
    ];
  }
}
