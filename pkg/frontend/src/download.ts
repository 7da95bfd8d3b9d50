/** Stream a blob to the user as a file download, bytes unmodified. */
export function triggerDownload(blob: Blob, filename: string): void {
  const anchor = document.createElement("a");
  anchor.style.display = "none";
  const url = URL.createObjectURL(blob);
  anchor.href = url;
  anchor.download = filename;
  document.body.appendChild(anchor);
  anchor.click();
  anchor.remove();
  URL.revokeObjectURL(url);
}
